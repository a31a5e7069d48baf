//! Config files: `key = value` lines under optional `[section]` headers. Keys are flag names
//! without the leading dashes. The command's own section wins over the top-level keys, and
//! flags given on the command line win over both.

use std::path::Path;
use std::str::FromStr;

use ini::Ini;

pub struct FileConfig {
    ini: Option<Ini>,
    section: String,
}

impl FileConfig {
    pub fn empty() -> Self {
        Self { ini: None, section: String::new() }
    }

    pub fn load(path: &Path, section: &str) -> Result<Self, String> {
        let ini = Ini::load_from_file(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Ok(Self { ini: Some(ini), section: section.to_string() })
    }

    #[cfg(test)]
    pub fn parse(text: &str, section: &str) -> Result<Self, String> {
        let ini = Ini::load_from_str(text).map_err(|e| format!("bad config: {e}"))?;
        Ok(Self { ini: Some(ini), section: section.to_string() })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        let ini = self.ini.as_ref()?;
        let alt = key.replace('-', "_");
        let look = |sec: Option<&str>| {
            let p = ini.section(sec)?;
            p.get(key).or_else(|| p.get(&alt))
        };
        look(Some(self.section.as_str())).or_else(|| look(None))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, String> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.trim().parse().map(Some).map_err(|_| format!("config key '{key}': cannot parse '{v}'")),
        }
    }

    pub fn flag(&self, key: &str) -> Result<bool, String> {
        match self.raw(key).map(str::trim) {
            None => Ok(false),
            Some("true" | "1" | "yes" | "on") => Ok(true),
            Some("false" | "0" | "no" | "off") => Ok(false),
            Some(v) => Err(format!("config key '{key}': expected a boolean, got '{v}'")),
        }
    }

    /// Fills `slot` from the file unless the command line already set it.
    pub fn fill<T: FromStr>(&self, slot: &mut Option<T>, key: &str) -> Result<(), String> {
        if slot.is_none() {
            *slot = self.get(key)?;
        }
        Ok(())
    }

    /// Keys present in the file that no command understands.
    pub fn unknown_keys(&self, known: &[&str]) -> Vec<String> {
        let Some(ini) = &self.ini else { return Vec::new() };
        let mut out = Vec::new();
        for (_, props) in ini.iter() {
            for (k, _) in props.iter() {
                let k = k.replace('_', "-");
                if !known.contains(&k.as_str()) {
                    out.push(k);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn section_overrides_top_level() {
        let c = FileConfig::parse("points = 5\nphase = quadratic\n[sweep]\npoints = 9\nlambda_min = 20\n", "sweep")
            .unwrap();
        assert_eq!(c.get::<usize>("points").unwrap(), Some(9));
        assert_eq!(c.get::<f64>("lambda-min").unwrap(), Some(20.0));
        assert_eq!(c.get::<String>("phase").unwrap().as_deref(), Some("quadratic"));
        let other = FileConfig::parse("points = 5\n[sweep]\npoints = 9\n", "eval").unwrap();
        assert_eq!(other.get::<usize>("points").unwrap(), Some(5));
    }

    #[test]
    fn flags_win() {
        let c = FileConfig::parse("points = 5\n", "sweep").unwrap();
        let mut p = Some(7usize);
        c.fill(&mut p, "points").unwrap();
        assert_eq!(p, Some(7));
        let mut q: Option<usize> = None;
        c.fill(&mut q, "points").unwrap();
        assert_eq!(q, Some(5));
    }

    #[test]
    fn bad_values_are_reported() {
        let c = FileConfig::parse("points = many\njson = maybe\n", "sweep").unwrap();
        assert!(c.get::<usize>("points").is_err());
        assert!(c.flag("json").is_err());
        assert_eq!(c.unknown_keys(&["json"]), vec!["points".to_string()]);
    }
}
