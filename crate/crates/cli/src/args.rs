//! Minimal flag parser: every flag is `--name value` except declared
//! booleans. Unknown flags are usage errors so typos never pass silently.

use std::collections::BTreeMap;

pub struct Flags {
    values: BTreeMap<String, String>,
    bools: BTreeMap<String, bool>,
}

pub fn parse(
    args: &[String],
    allowed: &[&str],
    allowed_bool: &[&str],
) -> Result<Flags, String> {
    let mut values = BTreeMap::new();
    let mut bools: BTreeMap<String, bool> =
        allowed_bool.iter().map(|b| (b.to_string(), false)).collect();
    let mut it = args.iter();
    while let Some(token) = it.next() {
        let name = token
            .strip_prefix("--")
            .ok_or_else(|| format!("unexpected argument `{token}`"))?;
        if allowed_bool.contains(&name) {
            bools.insert(name.to_string(), true);
        } else if allowed.contains(&name) {
            let value = it
                .next()
                .ok_or_else(|| format!("flag --{name} needs a value"))?;
            values.insert(name.to_string(), value.clone());
        } else {
            return Err(format!("unknown flag --{name}"));
        }
    }
    Ok(Flags { values, bools })
}

impl Flags {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.values.get(name).map(|s| s.as_str())
    }

    pub fn require(&self, name: &str) -> Result<&str, String> {
        self.get(name).ok_or_else(|| format!("missing required flag --{name}"))
    }

    pub fn bool(&self, name: &str) -> bool {
        self.bools.get(name).copied().unwrap_or(false)
    }

    pub fn parse_or<T: std::str::FromStr>(&self, name: &str, default: T) -> Result<T, String> {
        match self.get(name) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| format!("flag --{name}: cannot parse `{raw}`")),
        }
    }

    pub fn parse_require<T: std::str::FromStr>(&self, name: &str) -> Result<T, String> {
        let raw = self.require(name)?;
        raw.parse()
            .map_err(|_| format!("flag --{name}: cannot parse `{raw}`"))
    }
}

/// "32x64" -> (32, 64)
pub fn parse_grid(raw: &str) -> Result<(usize, usize), String> {
    let (a, b) = raw
        .split_once('x')
        .ok_or_else(|| format!("grid `{raw}` must look like NLATxNLON, e.g. 32x64"))?;
    let nlat = a.parse().map_err(|_| format!("bad grid dimension `{a}`"))?;
    let nlon = b.parse().map_err(|_| format!("bad grid dimension `{b}`"))?;
    Ok((nlat, nlon))
}

/// "1,2,4" -> [1, 2, 4]
pub fn parse_usize_list(raw: &str) -> Result<Vec<usize>, String> {
    raw.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| format!("bad list entry `{part}`"))
        })
        .collect()
}

pub fn parse_path_list(raw: &str) -> Vec<std::path::PathBuf> {
    raw.split(',')
        .filter(|p| !p.is_empty())
        .map(std::path::PathBuf::from)
        .collect()
}
