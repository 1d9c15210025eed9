//! Bundled model files.

use crate::dsl::{parse_model, DslError, ModelFile};

pub const MODELS: [(&str, &str); 3] = [
    ("illustrative", include_str!("../catalog/illustrative.ham")),
    ("ramsey", include_str!("../catalog/ramsey.ham")),
    ("ak", include_str!("../catalog/ak.ham")),
];

pub fn source(name: &str) -> Option<&'static str> {
    MODELS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Parses a bundled model; `None` for an unknown name.
pub fn model(name: &str) -> Option<Result<ModelFile, DslError>> {
    source(name).map(parse_model)
}

/// First comment line of a bundled file.
pub fn summary(name: &str) -> Option<&'static str> {
    source(name)?.lines().find_map(|l| l.strip_prefix('#')).map(str::trim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_bundled_models_load() {
        for (name, _) in MODELS {
            let m = model(name).unwrap().unwrap();
            assert_eq!(m.model.name, name);
        }
        assert!(model("ramsey").unwrap().unwrap().restriction_mode());
        assert!(model("nope").is_none());
    }
}
