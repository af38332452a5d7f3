use super::{Clayton, CopulaFamily, Family, Gaussian, Gumbel, Rotation, StudentT4};
use crate::error::{Error, Result};
use std::sync::OnceLock;

/// Name-indexed set of copula family implementations.
pub struct FamilyRegistry {
    entries: Vec<&'static dyn CopulaFamily>,
}

impl FamilyRegistry {
    pub fn empty() -> Self {
        FamilyRegistry { entries: Vec::new() }
    }

    /// Registry with the four builtin families.
    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register(&Gaussian);
        reg.register(&StudentT4);
        reg.register(&Clayton);
        reg.register(&Gumbel);
        reg
    }

    pub fn builtin() -> &'static FamilyRegistry {
        static REGISTRY: OnceLock<FamilyRegistry> = OnceLock::new();
        REGISTRY.get_or_init(FamilyRegistry::with_builtins)
    }

    /// Adds a family, replacing any existing entry with the same name.
    pub fn register(&mut self, family: &'static dyn CopulaFamily) {
        self.entries.retain(|f| f.name() != family.name());
        self.entries.push(family);
    }

    pub fn get(&self, name: &str) -> Option<&'static dyn CopulaFamily> {
        self.entries.iter().copied().find(|f| f.name() == name)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|f| f.name()).collect()
    }

    pub fn family(&self, name: &str) -> Result<Family> {
        let base = self.get(name).ok_or_else(|| Error::UnknownFamily(name.to_string()))?;
        Family::new(base, Rotation::R0)
    }

    /// Parses `name` or `name@deg`, e.g. `clayton@90`.
    pub fn parse(&self, s: &str) -> Result<Family> {
        let s = s.trim().to_ascii_lowercase();
        let (name, rotation) = match s.split_once('@') {
            Some((n, deg)) => {
                let deg: u32 = deg
                    .trim()
                    .parse()
                    .map_err(|_| Error::UnknownFamily(s.clone()))?;
                let rot = Rotation::from_degrees(deg).ok_or_else(|| Error::UnknownFamily(s.clone()))?;
                (n.trim().to_string(), rot)
            }
            None => (s.clone(), Rotation::R0),
        };
        let base = self.get(&name).ok_or(Error::UnknownFamily(name))?;
        Family::new(base, rotation)
    }

    /// Parses a comma-separated family list; duplicates are rejected.
    pub fn parse_set(&self, list: &str) -> Result<Vec<Family>> {
        let mut out: Vec<Family> = Vec::new();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let fam = self.parse(item)?;
            if out.contains(&fam) {
                return Err(Error::Config(format!("family `{fam}` listed twice")));
            }
            out.push(fam);
        }
        if out.is_empty() {
            return Err(Error::Config("empty family set".into()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_names_and_rotations() {
        let reg = FamilyRegistry::builtin();
        assert_eq!(reg.parse("Clayton@90").unwrap().to_string(), "clayton@90");
        assert_eq!(reg.parse("t4").unwrap(), Family::t4());
        assert!(reg.parse("gaussian@90").is_err());
        assert!(reg.parse("frank").is_err());
        assert!(reg.parse("gumbel@45").is_err());
        let set = reg.parse_set("gaussian, t4,clayton,gumbel").unwrap();
        assert_eq!(set.len(), 4);
        assert!(reg.parse_set("gaussian,gaussian").is_err());
    }

    #[test]
    fn custom_registration_replaces_by_name() {
        let mut reg = FamilyRegistry::empty();
        reg.register(&Gaussian);
        reg.register(&Gaussian);
        assert_eq!(reg.names(), vec!["gaussian"]);
        assert!(reg.parse("clayton").is_err());
    }
}
