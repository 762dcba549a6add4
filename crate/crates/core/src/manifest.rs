//! Sample manifests and the domain structure derived from them.
//!
//! A manifest is UTF-8 JSON-lines, one [`SampleRecord`] per line. Records are
//! grouped into domains: a real sample belongs to `Real(source)`, a fake
//! sample to `Fake(source, generator)`. Every fake domain maps back to the
//! real domain of its source through [`DomainKey::base`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Fake => "fake",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub id: String,
    pub label: Label,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    pub dataset: String,
    pub duration_s: f64,
    pub path: String,
}

impl SampleRecord {
    pub fn domain(&self) -> DomainKey {
        match (self.label, &self.generator) {
            (Label::Fake, Some(generator)) => DomainKey::fake(&self.source, generator),
            // validated records never hit this arm with a missing generator
            _ => DomainKey::real(&self.source),
        }
    }

    /// Checks the per-record invariants, returning the first violation.
    pub fn check(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.source.is_empty() {
            return Err("empty source".into());
        }
        if !self.duration_s.is_finite() || self.duration_s < 0.0 {
            return Err(format!("invalid duration_s {}", self.duration_s));
        }
        match (self.label, self.generator.as_deref()) {
            (Label::Fake, None) => Err("fake without generator".into()),
            (Label::Fake, Some("")) => Err("fake with empty generator".into()),
            (Label::Real, Some(_)) => Err("real with generator".into()),
            _ => Ok(()),
        }
    }

    fn normalize(&mut self) {
        trim_in_place(&mut self.source);
        if let Some(generator) = self.generator.as_mut() {
            trim_in_place(generator);
        }
    }
}

fn trim_in_place(s: &mut String) {
    let trimmed = s.trim();
    if trimmed.len() != s.len() {
        *s = trimmed.to_string();
    }
}

/// A sampling domain: a real source, or a (source, generator) pair.
///
/// The derived ordering puts fake domains before real ones and compares
/// components field by field.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DomainKey {
    Fake { source: String, generator: String },
    Real { source: String },
}

impl DomainKey {
    pub fn real(source: impl Into<String>) -> Self {
        DomainKey::Real {
            source: source.into(),
        }
    }

    pub fn fake(source: impl Into<String>, generator: impl Into<String>) -> Self {
        DomainKey::Fake {
            source: source.into(),
            generator: generator.into(),
        }
    }

    /// The real domain a fake domain was derived from. Real domains are their own base.
    pub fn base(&self) -> DomainKey {
        DomainKey::real(self.source())
    }

    pub fn source(&self) -> &str {
        match self {
            DomainKey::Real { source } | DomainKey::Fake { source, .. } => source,
        }
    }

    pub fn generator(&self) -> Option<&str> {
        match self {
            DomainKey::Fake { generator, .. } => Some(generator),
            DomainKey::Real { .. } => None,
        }
    }

    pub fn label(&self) -> Label {
        match self {
            DomainKey::Real { .. } => Label::Real,
            DomainKey::Fake { .. } => Label::Fake,
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self, DomainKey::Real { .. })
    }

    pub fn is_fake(&self) -> bool {
        matches!(self, DomainKey::Fake { .. })
    }
}

// Components are percent-escaped so that `/` inside a name cannot be confused
// with the separator.
fn escape_component(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '%' => out.push_str("%25"),
            '/' => out.push_str("%2F"),
            _ => out.push(c),
        }
    }
    out
}

fn unescape_component(s: &str) -> Result<String, ParseDomainKeyError> {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find('%') {
        out.push_str(&rest[..pos]);
        let code = rest.get(pos + 1..pos + 3);
        match code {
            Some("25") => out.push('%'),
            Some("2F") | Some("2f") => out.push('/'),
            _ => return Err(ParseDomainKeyError(s.to_string())),
        }
        rest = &rest[pos + 3..];
    }
    out.push_str(rest);
    Ok(out)
}

impl fmt::Display for DomainKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainKey::Real { source } => write!(f, "real/{}", escape_component(source)),
            DomainKey::Fake { source, generator } => write!(
                f,
                "fake/{}/{}",
                escape_component(source),
                escape_component(generator)
            ),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid domain key {0:?}")]
pub struct ParseDomainKeyError(pub String);

impl FromStr for DomainKey {
    type Err = ParseDomainKeyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseDomainKeyError(s.to_string());
        let parts: Vec<&str> = s.split('/').collect();
        match parts.as_slice() {
            ["real", source] if !source.is_empty() => {
                Ok(DomainKey::real(unescape_component(source)?))
            }
            ["fake", source, generator] if !source.is_empty() && !generator.is_empty() => Ok(
                DomainKey::fake(unescape_component(source)?, unescape_component(generator)?),
            ),
            _ => Err(err()),
        }
    }
}

impl Serialize for DomainKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DomainKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineError {
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid manifest ({} error(s)); first: {}", .0.len(), .0[0])]
    Invalid(Vec<LineError>),
    #[error("empty pool")]
    EmptyPool,
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("invalid source map: {0}")]
    SourceMap(String),
}

/// Parses a JSON-lines manifest, collecting every line-level error.
///
/// Blank lines are skipped. Source and generator names are trimmed; all
/// other fields are taken verbatim.
pub fn parse_manifest<R: BufRead>(reader: R) -> Result<Vec<SampleRecord>, ManifestError> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut first_seen: HashMap<String, usize> = HashMap::new();

    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut record: SampleRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                errors.push(LineError {
                    line: lineno,
                    reason: format!("malformed record: {e}"),
                });
                continue;
            }
        };
        record.normalize();
        if let Err(reason) = record.check() {
            errors.push(LineError {
                line: lineno,
                reason,
            });
            continue;
        }
        if let Some(&prev) = first_seen.get(&record.id) {
            errors.push(LineError {
                line: lineno,
                reason: format!(
                    "duplicate id {:?} on lines {} and {}",
                    record.id, prev, lineno
                ),
            });
            continue;
        }
        first_seen.insert(record.id.clone(), lineno);
        records.push(record);
    }

    if errors.is_empty() {
        Ok(records)
    } else {
        Err(ManifestError::Invalid(errors))
    }
}

pub fn write_manifest<W: Write>(mut writer: W, records: &[SampleRecord]) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// Domain sizes `n_d`. Every stored size is at least 1.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DomainSizes(BTreeMap<DomainKey, u64>);

impl DomainSizes {
    /// Builds sizes from raw counts; zero-sized domains are dropped with a warning.
    pub fn from_counts<I: IntoIterator<Item = (DomainKey, u64)>>(counts: I) -> Self {
        let mut map = BTreeMap::new();
        for (key, n) in counts {
            if n == 0 {
                log::warn!("dropping empty domain {key}");
                continue;
            }
            *map.entry(key).or_insert(0) += n;
        }
        DomainSizes(map)
    }

    pub fn get(&self, key: &DomainKey) -> Option<u64> {
        self.0.get(key).copied()
    }

    pub fn contains(&self, key: &DomainKey) -> bool {
        self.0.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DomainKey, u64)> {
        self.0.iter().map(|(k, &n)| (k, n))
    }

    pub fn fakes(&self) -> impl Iterator<Item = (&DomainKey, u64)> {
        self.iter().filter(|(k, _)| k.is_fake())
    }

    pub fn reals(&self) -> impl Iterator<Item = (&DomainKey, u64)> {
        self.iter().filter(|(k, _)| k.is_real())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }
}

/// Samples grouped by domain, with ids sorted inside each domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainIndex {
    pool_id: String,
    domains: BTreeMap<DomainKey, Vec<String>>,
    sizes: DomainSizes,
}

impl DomainIndex {
    /// Content digest of the indexed pool (independent of input order).
    pub fn pool_id(&self) -> &str {
        &self.pool_id
    }

    pub fn sizes(&self) -> &DomainSizes {
        &self.sizes
    }

    pub fn ids(&self, key: &DomainKey) -> Option<&[String]> {
        self.domains.get(key).map(Vec::as_slice)
    }

    pub fn domains(&self) -> impl Iterator<Item = (&DomainKey, &[String])> {
        self.domains.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }
}

pub fn index_domains(records: &[SampleRecord]) -> Result<DomainIndex, ManifestError> {
    if records.is_empty() {
        return Err(ManifestError::EmptyPool);
    }
    let mut domains: BTreeMap<DomainKey, Vec<String>> = BTreeMap::new();
    for record in records {
        domains
            .entry(record.domain())
            .or_default()
            .push(record.id.clone());
    }
    for ids in domains.values_mut() {
        ids.sort_unstable();
    }

    let mut all: Vec<&str> = domains.values().flatten().map(String::as_str).collect();
    all.sort_unstable();
    if let Some(w) = all.windows(2).find(|w| w[0] == w[1]) {
        return Err(ManifestError::DuplicateId(w[0].to_string()));
    }

    let mut hasher = Sha256::new();
    for (key, ids) in &domains {
        hasher.update(key.to_string().as_bytes());
        hasher.update([0u8]);
        for id in ids {
            hasher.update(id.as_bytes());
            hasher.update([0u8]);
        }
        hasher.update([1u8]);
    }
    let pool_id = hex::encode(&hasher.finalize()[..8]);

    let sizes = DomainSizes::from_counts(domains.iter().map(|(k, v)| (k.clone(), v.len() as u64)));
    Ok(DomainIndex {
        pool_id,
        domains,
        sizes,
    })
}

/// Maps `(dataset, source)` pairs to a canonical source name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CanonicalSourceMap {
    alias: BTreeMap<(String, String), String>,
}

impl CanonicalSourceMap {
    /// Builds a map, rejecting entries whose canonical name is itself remapped
    /// to something else for the same dataset (the map must be idempotent).
    pub fn new<I>(entries: I) -> Result<Self, ManifestError>
    where
        I: IntoIterator<Item = ((String, String), String)>,
    {
        let alias: BTreeMap<(String, String), String> = entries
            .into_iter()
            .map(|((d, s), c)| {
                (
                    (d.trim().to_string(), s.trim().to_string()),
                    c.trim().to_string(),
                )
            })
            .collect();
        for ((dataset, source), canonical) in &alias {
            if canonical.is_empty() {
                return Err(ManifestError::SourceMap(format!(
                    "empty canonical name for {dataset}/{source}"
                )));
            }
            if let Some(again) = alias.get(&(dataset.clone(), canonical.clone())) {
                if again != canonical {
                    return Err(ManifestError::SourceMap(format!(
                        "not idempotent: {dataset}/{source} -> {canonical} -> {again}"
                    )));
                }
            }
        }
        Ok(Self { alias })
    }

    /// Parses the `{"dataset/source": "canonical"}` file format.
    pub fn from_json(text: &str) -> Result<Self, ManifestError> {
        let raw: BTreeMap<String, String> =
            serde_json::from_str(text).map_err(|e| ManifestError::SourceMap(e.to_string()))?;
        let mut entries = Vec::with_capacity(raw.len());
        for (key, canonical) in raw {
            let (dataset, source) = key.split_once('/').ok_or_else(|| {
                ManifestError::SourceMap(format!("key {key:?} is not dataset/source"))
            })?;
            entries.push(((dataset.to_string(), source.to_string()), canonical));
        }
        Self::new(entries)
    }

    pub fn canonical(&self, dataset: &str, source: &str) -> Option<&str> {
        self.alias
            .get(&(dataset.to_string(), source.to_string()))
            .map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.alias.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupReport {
    /// Real records collapsed away, per contributing dataset.
    pub removed: BTreeMap<String, u64>,
    /// Records whose source was rewritten, per dataset.
    pub rewritten: BTreeMap<String, u64>,
    /// Records whose (dataset, source) pair had no map entry, per dataset.
    pub unmapped: BTreeMap<String, u64>,
}

impl DedupReport {
    pub fn total_removed(&self) -> u64 {
        self.removed.values().sum()
    }
}

/// Rewrites sources to canonical names and collapses real records that share
/// `(canonical source, id)`.
///
/// Among colliding real records the survivor is the one whose dataset equals
/// the canonical source name; failing that, the lexicographically smallest
/// dataset, then the earliest in input order. Survivors keep input order.
pub fn canonicalize_sources(
    records: &[SampleRecord],
    map: &CanonicalSourceMap,
) -> (Vec<SampleRecord>, DedupReport) {
    let mut report = DedupReport::default();
    let mut rewritten: Vec<SampleRecord> = Vec::with_capacity(records.len());
    for record in records {
        let mut r = record.clone();
        match map.canonical(&r.dataset, &r.source) {
            Some(canonical) => {
                if canonical != r.source {
                    *report.rewritten.entry(r.dataset.clone()).or_insert(0) += 1;
                    r.source = canonical.to_string();
                }
            }
            None => {
                if !map.is_empty() {
                    *report.unmapped.entry(r.dataset.clone()).or_insert(0) += 1;
                }
            }
        }
        rewritten.push(r);
    }

    // (source, id) -> position of the current survivor
    let mut winner: HashMap<(&str, &str), usize> = HashMap::new();
    let mut keep = vec![true; rewritten.len()];
    for (pos, r) in rewritten.iter().enumerate() {
        if r.label != Label::Real {
            continue;
        }
        let key = (r.source.as_str(), r.id.as_str());
        match winner.get(&key).copied() {
            None => {
                winner.insert(key, pos);
            }
            Some(prev) => {
                let incumbent = &rewritten[prev];
                let rank = |rec: &SampleRecord| (rec.dataset != rec.source, rec.dataset.clone());
                let loser = if rank(r) < rank(incumbent) {
                    winner.insert(key, pos);
                    prev
                } else {
                    pos
                };
                keep[loser] = false;
                *report
                    .removed
                    .entry(rewritten[loser].dataset.clone())
                    .or_insert(0) += 1;
            }
        }
    }

    let out = rewritten
        .into_iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then_some(r))
        .collect();
    (out, report)
}
