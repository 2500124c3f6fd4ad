use std::collections::{BTreeMap, BTreeSet};

use super::CodebookError;

/// Mapping from codes of one scheme revision to codes of another; both
/// many-to-one and one-to-many links are allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Crosswalk {
    from_scheme: String,
    to_scheme: String,
    mapping: BTreeMap<String, BTreeSet<String>>,
}

impl Crosswalk {
    pub fn new<I, A, B>(from_scheme: &str, to_scheme: &str, pairs: I) -> Crosswalk
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let mut mapping: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (a, b) in pairs {
            mapping.entry(a.into()).or_default().insert(b.into());
        }
        Crosswalk { from_scheme: from_scheme.to_string(), to_scheme: to_scheme.to_string(), mapping }
    }

    /// Maps every code onto itself.
    pub fn identity<'a, I>(scheme: &str, codes: I) -> Crosswalk
    where
        I: IntoIterator<Item = &'a str>,
    {
        Crosswalk::new(scheme, scheme, codes.into_iter().map(|c| (c, c)))
    }

    pub fn from_scheme(&self) -> &str {
        &self.from_scheme
    }

    pub fn to_scheme(&self) -> &str {
        &self.to_scheme
    }

    /// Full target set of `code`, ascending.
    pub fn targets(&self, code: &str) -> Result<&BTreeSet<String>, CodebookError> {
        self.mapping.get(code).filter(|t| !t.is_empty()).ok_or_else(|| CodebookError::UnmappedCode {
            from_scheme: self.from_scheme.clone(),
            to_scheme: self.to_scheme.clone(),
            code: code.to_string(),
        })
    }

    pub fn source_codes(&self) -> impl Iterator<Item = &str> {
        self.mapping.keys().map(String::as_str)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.mapping.iter().flat_map(|(a, bs)| bs.iter().map(move |b| (a.as_str(), b.as_str())))
    }

    pub(super) fn merge(&mut self, other: Crosswalk) {
        for (a, bs) in other.mapping {
            self.mapping.entry(a).or_default().extend(bs);
        }
    }
}

pub(super) fn parse_tsv(file: &str, text: &str) -> Result<Vec<Crosswalk>, CodebookError> {
    let mut out: Vec<Crosswalk> = Vec::new();
    for (idx, raw) in text.lines().enumerate().skip(1) {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        let [from, to, a, b] = cols[..] else {
            return Err(CodebookError::Parse {
                file: file.to_string(),
                line: idx + 1,
                message: format!("expected 4 columns, found {}", cols.len()),
            });
        };
        let single = Crosswalk::new(from, to, [(a, b)]);
        match out.iter_mut().find(|c| c.from_scheme == from && c.to_scheme == to) {
            Some(c) => c.merge(single),
            None => out.push(single),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(codes: &[&str]) -> BTreeSet<String> {
        codes.iter().map(|c| c.to_string()).collect()
    }

    #[test]
    fn many_to_one_and_one_to_many() {
        let cw = Crosswalk::new(
            "SNI2002",
            "SNI2007",
            [("64201", "61100"), ("64202", "61100"), ("37100", "38320"), ("37100", "38311")],
        );
        assert_eq!(cw.targets("64201").unwrap(), &set(&["61100"]));
        assert_eq!(cw.targets("64202").unwrap(), &set(&["61100"]));
        let ordered: Vec<&str> = cw.targets("37100").unwrap().iter().map(String::as_str).collect();
        assert_eq!(ordered, ["38311", "38320"]);
    }

    #[test]
    fn unmapped_code_errors() {
        let cw = Crosswalk::new("A", "B", [("1", "2")]);
        assert!(matches!(cw.targets("9"), Err(CodebookError::UnmappedCode { .. })));
    }

    #[test]
    fn identity_maps_to_self() {
        let cw = Crosswalk::identity("X", ["1", "22", "333"]);
        for c in ["1", "22", "333"] {
            assert_eq!(cw.targets(c).unwrap(), &set(&[c]));
        }
    }
}
