use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::TemplateError;
use crate::trajectory::{BaselineProfile, EventKind, LifeEvent};

/// Fields a baseline sentence may reference.
pub const BASELINE_FIELDS: [&str; 17] = [
    "year",
    "sex",
    "age",
    "residence",
    "family_relation",
    "child_status",
    "education_level",
    "education_field",
    "employment",
    "occupation",
    "industry",
    "workplace_municipality",
    "labor_market_region",
    "income_percentile",
    "income_decile",
    "main_income_source",
    "government_support",
];

/// Fields an event sentence may reference.
pub const EVENT_FIELDS: [&str; 3] = ["year", "from", "to"];

const MAX_DEPTH: usize = 8;
const DEFAULT_KEY: &str = "_default";

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Slot { name: String, filter: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Template {
    source: String,
    pieces: Vec<Piece>,
}

impl Template {
    fn parse(source: &str) -> Result<Template, TemplateError> {
        let err = |message: &str| TemplateError::Syntax { template: source.to_string(), message: message.to_string() };
        let mut pieces = Vec::new();
        let mut rest = source;
        while let Some(open) = rest.find(['{', '}']) {
            if rest.as_bytes()[open] == b'}' {
                return Err(err("unmatched '}'"));
            }
            if open > 0 {
                pieces.push(Piece::Text(rest[..open].to_string()));
            }
            let after = &rest[open + 1..];
            let close = after.find('}').ok_or_else(|| err("unclosed '{'"))?;
            let inner = &after[..close];
            if inner.contains('{') {
                return Err(err("nested '{'"));
            }
            let (name, filter) = match inner.split_once('|') {
                Some((n, f)) => (n.trim(), Some(f.trim())),
                None => (inner.trim(), None),
            };
            if name.is_empty() || filter.is_some_and(str::is_empty) {
                return Err(err("empty placeholder"));
            }
            pieces.push(Piece::Slot { name: name.to_string(), filter: filter.map(str::to_string) });
            rest = &after[close + 1..];
        }
        if !rest.is_empty() {
            pieces.push(Piece::Text(rest.to_string()));
        }
        Ok(Template { source: source.to_string(), pieces })
    }

    fn slots(&self) -> impl Iterator<Item = (&str, Option<&str>)> {
        self.pieces.iter().filter_map(|p| match p {
            Piece::Slot { name, filter } => Some((name.as_str(), filter.as_deref())),
            Piece::Text(_) => None,
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBaseline {
    order: Vec<String>,
    groups: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTemplateSet {
    version: String,
    #[serde(default = "default_separator")]
    separator: String,
    baseline: RawBaseline,
    #[serde(default)]
    events: BTreeMap<String, String>,
    #[serde(default)]
    variants: BTreeMap<String, BTreeMap<String, String>>,
}

fn default_separator() -> String {
    " ".to_string()
}

/// Sentence templates for baselines and events, loaded from a TOML file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    version: String,
    separator: String,
    order: Vec<String>,
    groups: BTreeMap<String, Template>,
    events: BTreeMap<EventKind, Template>,
    variants: BTreeMap<String, BTreeMap<String, Template>>,
}

const BUNDLED_EN: &str = include_str!("../../data/templates/en.toml");

impl TemplateSet {
    /// The English template set shipped with the crate.
    pub fn bundled() -> TemplateSet {
        Self::parse(BUNDLED_EN).expect("bundled templates are valid")
    }

    pub fn bundled_source() -> &'static str {
        BUNDLED_EN
    }

    pub fn load(path: &Path) -> Result<TemplateSet, TemplateError> {
        let text = fs::read_to_string(path)
            .map_err(|e| TemplateError::Io { path: path.to_path_buf(), message: e.to_string() })?;
        Self::parse(&text)
    }

    /// Parses and checks a template file: syntax, known fields and variant
    /// tables. Event kinds without a template are only reported when such an
    /// event is rendered.
    pub fn parse(text: &str) -> Result<TemplateSet, TemplateError> {
        let raw: RawTemplateSet = toml::from_str(text).map_err(|e| TemplateError::Toml(e.to_string()))?;
        let mut groups = BTreeMap::new();
        for (name, src) in &raw.baseline.groups {
            groups.insert(name.clone(), Template::parse(src)?);
        }
        for name in &raw.baseline.order {
            if !groups.contains_key(name) {
                return Err(TemplateError::MissingGroup(name.clone()));
            }
        }
        let mut events = BTreeMap::new();
        for (key, src) in &raw.events {
            let kind = EventKind::ALL
                .into_iter()
                .find(|k| k.key() == key)
                .ok_or_else(|| TemplateError::UnknownEventKind(key.clone()))?;
            events.insert(kind, Template::parse(src)?);
        }
        let mut variants = BTreeMap::new();
        for (table, entries) in &raw.variants {
            let mut parsed = BTreeMap::new();
            for (key, src) in entries {
                parsed.insert(key.clone(), Template::parse(src)?);
            }
            variants.insert(table.clone(), parsed);
        }
        let set = TemplateSet {
            version: raw.version,
            separator: raw.separator,
            order: raw.baseline.order,
            groups,
            events,
            variants,
        };
        set.check_references()?;
        Ok(set)
    }

    fn check_references(&self) -> Result<(), TemplateError> {
        let check = |t: &Template, fields: &[&str], in_variant: bool| -> Result<(), TemplateError> {
            for (name, filter) in t.slots() {
                let known = fields.contains(&name) || (in_variant && name == "value");
                if !known {
                    return Err(TemplateError::UnknownField { field: name.to_string(), template: t.source.clone() });
                }
                if let Some(f) = filter {
                    if f != "lower" && !self.variants.contains_key(f) {
                        return Err(TemplateError::UnknownFilter { filter: f.to_string(), template: t.source.clone() });
                    }
                }
            }
            Ok(())
        };
        for t in self.groups.values() {
            check(t, &BASELINE_FIELDS, false)?;
        }
        for t in self.events.values() {
            check(t, &EVENT_FIELDS, false)?;
        }
        // variant entries may be reached from either kind of sentence
        let all: Vec<&str> = BASELINE_FIELDS.iter().chain(EVENT_FIELDS.iter()).copied().collect();
        for table in self.variants.values() {
            for t in table.values() {
                check(t, &all, true)?;
            }
        }
        Ok(())
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    /// Baseline groups in rendering order.
    pub fn baseline_order(&self) -> &[String] {
        &self.order
    }

    /// Copy that renders only the named baseline groups, in the given order.
    pub fn with_baseline_groups(&self, names: &[&str]) -> Result<TemplateSet, TemplateError> {
        let mut out = self.clone();
        out.order = Vec::with_capacity(names.len());
        for &n in names {
            if !self.groups.contains_key(n) {
                return Err(TemplateError::MissingGroup(n.to_string()));
            }
            out.order.push(n.to_string());
        }
        Ok(out)
    }

    /// Copy without the template for `kind`.
    pub fn without_event(&self, kind: EventKind) -> TemplateSet {
        let mut out = self.clone();
        out.events.remove(&kind);
        out
    }

    pub fn has_event(&self, kind: EventKind) -> bool {
        self.events.contains_key(&kind)
    }

    pub fn separator(&self) -> &str {
        &self.separator
    }

    pub(crate) fn render_baseline(&self, b: &BaselineProfile) -> Result<Vec<String>, TemplateError> {
        let ctx = Context::Baseline(b);
        let mut out = Vec::with_capacity(self.order.len());
        for name in &self.order {
            let sentence = self.expand(&self.groups[name], &ctx, None, 0)?;
            if !sentence.trim().is_empty() {
                out.push(sentence);
            }
        }
        Ok(out)
    }

    pub(crate) fn render_event(&self, e: &LifeEvent) -> Result<Option<String>, TemplateError> {
        let t = self.events.get(&e.kind).ok_or(TemplateError::MissingEvent(e.kind))?;
        let sentence = self.expand(t, &Context::Event(e), None, 0)?;
        Ok((!sentence.trim().is_empty()).then_some(sentence))
    }

    fn expand(&self, t: &Template, ctx: &Context<'_>, value: Option<&str>, depth: usize) -> Result<String, TemplateError> {
        if depth > MAX_DEPTH {
            return Err(TemplateError::TooDeep(t.source.clone()));
        }
        let mut out = String::new();
        for piece in &t.pieces {
            match piece {
                Piece::Text(s) => out.push_str(s),
                Piece::Slot { name, filter } => {
                    let v: Cow<'_, str> = match (name.as_str(), value) {
                        ("value", Some(v)) => Cow::Borrowed(v),
                        _ => ctx.get(name).ok_or_else(|| TemplateError::UnknownField {
                            field: name.clone(),
                            template: t.source.clone(),
                        })?,
                    };
                    match filter.as_deref() {
                        None => out.push_str(&v),
                        Some("lower") => out.push_str(&lower_first(&v)),
                        Some(table) => {
                            let entries = self.variants.get(table).ok_or_else(|| TemplateError::UnknownFilter {
                                filter: table.to_string(),
                                template: t.source.clone(),
                            })?;
                            let entry = entries.get(v.as_ref()).or_else(|| entries.get(DEFAULT_KEY)).ok_or_else(|| {
                                TemplateError::NoVariant { table: table.to_string(), value: v.to_string() }
                            })?;
                            out.push_str(&self.expand(entry, ctx, Some(&v), depth + 1)?);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

enum Context<'a> {
    Baseline(&'a BaselineProfile),
    Event(&'a LifeEvent),
}

impl<'b> Context<'b> {
    fn get(&self, name: &str) -> Option<Cow<'b, str>> {
        let b = match *self {
            Context::Event(e) => {
                return match name {
                    "year" => Some(Cow::Owned(e.year.to_string())),
                    "from" => Some(Cow::Borrowed(&e.from_value)),
                    "to" => Some(Cow::Borrowed(&e.to_value)),
                    _ => None,
                }
            }
            Context::Baseline(b) => b,
        };
        let text = |s: &'b str| Some(Cow::Borrowed(s));
        match name {
            "year" => Some(Cow::Owned(b.year.to_string())),
            "age" => Some(Cow::Owned(b.age.to_string())),
            "income_percentile" => Some(Cow::Owned(b.income_percentile.to_string())),
            "income_decile" => Some(Cow::Owned(b.income_decile().to_string())),
            "sex" => text(&b.sex.description),
            "residence" => text(&b.residence.description),
            "family_relation" => text(&b.family_relation.description),
            "child_status" => text(&b.child_status.description),
            "education_level" => text(&b.education_level.description),
            "education_field" => text(&b.education_field.description),
            "employment" => text(&b.employment.description),
            "occupation" => text(&b.occupation.description),
            "industry" => text(&b.industry.description),
            "workplace_municipality" => text(&b.workplace_municipality.description),
            "labor_market_region" => text(&b.labor_market_region.description),
            "main_income_source" => text(&b.main_income_source.description),
            "government_support" => text(&b.government_support.description),
            _ => None,
        }
    }
}

/// Lowercases the first character unless the word looks like an acronym
/// (second character uppercase).
pub fn lower_first(s: &str) -> Cow<'_, str> {
    let mut chars = s.chars();
    let Some(first) = chars.next() else { return Cow::Borrowed(s) };
    if !first.is_uppercase() || chars.next().is_some_and(char::is_uppercase) {
        return Cow::Borrowed(s);
    }
    let mut out: String = first.to_lowercase().collect();
    out.push_str(&s[first.len_utf8()..]);
    Cow::Owned(out)
}
