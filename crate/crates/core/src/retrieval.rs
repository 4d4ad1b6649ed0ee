//! Corpus ingestion, weighted feature assembly, PCA, k-NN search and the
//! on-disk index.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audio::{self, LoadMode, Signal};
use crate::baseline::{self, BaselineKind, FrameSpec};
use crate::error::{Error, Result};
use crate::fractal::{EMFD_RBINS, MFDVL_LEN};
use crate::metrics::{self, TagSet};
use crate::signature::{self, DBINS, DEFAULT_ALPHA};

pub const INDEX_MAGIC: &str = "fracsig-index";
pub const INDEX_VERSION: u64 = 1;

/// One line of the corpus metadata file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusItem {
    pub id: String,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// Parses JSON Lines metadata. Relative audio paths are resolved against
/// `base_dir`.
pub fn parse_corpus(text: &str, base_dir: &Path) -> Result<Vec<CorpusItem>> {
    let mut items = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut item: CorpusItem = serde_json::from_str(line)
            .map_err(|e| Error::malformed("corpus metadata", format!("line {}: {e}", n + 1)))?;
        if item.id.is_empty() {
            return Err(Error::malformed("corpus metadata", format!("line {}: empty id", n + 1)));
        }
        if item.tags.is_none() && item.label.is_none() {
            return Err(Error::malformed(
                "corpus metadata",
                format!("line {}: item `{}` has neither tags nor label", n + 1, item.id),
            ));
        }
        if !seen.insert(item.id.clone()) {
            return Err(Error::malformed(
                "corpus metadata",
                format!("line {}: duplicate id `{}`", n + 1, item.id),
            ));
        }
        if item.path.is_relative() {
            item.path = base_dir.join(&item.path);
        }
        items.push(item);
    }
    if items.is_empty() {
        return Err(Error::malformed("corpus metadata", "no items"));
    }
    Ok(items)
}

pub fn load_corpus(path: &Path) -> Result<Vec<CorpusItem>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text, path.parent().unwrap_or(Path::new("")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    #[serde(rename = "emfd")]
    Emfd,
    #[serde(rename = "emfd-kde")]
    EmfdKde,
    #[serde(rename = "mfd-vl")]
    MfdVl,
    #[serde(rename = "mfcc13")]
    Mfcc13,
    #[serde(rename = "mfcc39")]
    Mfcc39,
    #[serde(rename = "logmel")]
    LogMel,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 6] = [
        FeatureKind::Emfd,
        FeatureKind::EmfdKde,
        FeatureKind::MfdVl,
        FeatureKind::Mfcc13,
        FeatureKind::Mfcc39,
        FeatureKind::LogMel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Emfd => "emfd",
            FeatureKind::EmfdKde => "emfd-kde",
            FeatureKind::MfdVl => "mfd-vl",
            FeatureKind::Mfcc13 => "mfcc13",
            FeatureKind::Mfcc39 => "mfcc39",
            FeatureKind::LogMel => "logmel",
        }
    }

    fn baseline(self) -> Option<BaselineKind> {
        match self {
            FeatureKind::Mfcc13 => Some(BaselineKind::Mfcc13),
            FeatureKind::Mfcc39 => Some(BaselineKind::Mfcc39),
            FeatureKind::LogMel => Some(BaselineKind::LogMel),
            _ => None,
        }
    }

    pub fn dim(self, frame: &FrameSpec) -> usize {
        match self {
            FeatureKind::Emfd | FeatureKind::EmfdKde => EMFD_RBINS * DBINS,
            FeatureKind::MfdVl => MFDVL_LEN,
            other => other.baseline().expect("baseline kind").dim(frame),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.name() == key || k.name().replace('-', "") == key)
            .ok_or_else(|| Error::param("feature", format!("unknown feature `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeaturePart {
    pub kind: FeatureKind,
    pub weight: f64,
}

/// Ordered feature blocks, each scaled by its weight before concatenation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureAssembly {
    pub parts: Vec<FeaturePart>,
    /// KDE smoothing constant for `emfd-kde` parts.
    pub alpha: f64,
    /// Frame parameters for the MFCC / log-mel parts.
    pub frame: FrameSpec,
}

impl FeatureAssembly {
    pub fn new(parts: Vec<FeaturePart>) -> Result<Self> {
        let assembly = FeatureAssembly {
            parts,
            alpha: DEFAULT_ALPHA,
            frame: FrameSpec::exp1(),
        };
        assembly.validate()?;
        Ok(assembly)
    }

    pub fn single(kind: FeatureKind) -> Self {
        FeatureAssembly::new(vec![FeaturePart { kind, weight: 1.0 }]).expect("single part is valid")
    }

    /// Parses `kind[:weight],kind[:weight],...`; a missing weight means 1.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut parts = Vec::new();
        for chunk in spec.split(',') {
            let chunk = chunk.trim();
            if chunk.is_empty() {
                return Err(Error::param("features", format!("empty entry in `{spec}`")));
            }
            let (name, weight) = match chunk.split_once(':') {
                Some((name, w)) => {
                    let w: f64 = w
                        .trim()
                        .parse()
                        .map_err(|_| Error::param("features", format!("bad weight `{w}` for `{name}`")))?;
                    (name, w)
                }
                None => (chunk, 1.0),
            };
            parts.push(FeaturePart {
                kind: name.parse()?,
                weight,
            });
        }
        FeatureAssembly::new(parts)
    }

    pub fn validate(&self) -> Result<()> {
        if self.parts.is_empty() {
            return Err(Error::param("features", "at least one feature is required"));
        }
        let mut seen = HashSet::new();
        for part in &self.parts {
            if !(part.weight.is_finite() && part.weight >= 0.0) {
                return Err(Error::param(
                    "features",
                    format!("weight for {} must be finite and >= 0, got {}", part.kind, part.weight),
                ));
            }
            if !seen.insert(part.kind) {
                return Err(Error::param("features", format!("{} listed twice", part.kind)));
            }
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::param("alpha", "must be > 0"));
        }
        if self.parts.iter().any(|p| p.kind.baseline().is_some()) {
            self.frame.validate()?;
        }
        Ok(())
    }

    pub fn total_dim(&self) -> usize {
        self.parts.iter().map(|p| p.kind.dim(&self.frame)).sum()
    }

    /// Concatenated, weighted feature vector of one signal.
    pub fn extract(&self, signal: &Signal) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.total_dim());
        for part in &self.parts {
            let block = match part.kind {
                FeatureKind::Emfd => signature::emfd(signal)?.flatten(),
                FeatureKind::EmfdKde => signature::emfd_kde(signal, self.alpha)?.flatten(),
                FeatureKind::MfdVl => signature::mfdvl(signal)?.values.to_vec(),
                other => baseline::extract(other.baseline().expect("baseline kind"), signal, &self.frame)?.values,
            };
            out.extend(block.into_iter().map(|v| v * part.weight));
        }
        Ok(out)
    }
}

impl fmt::Display for FeatureAssembly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}:{}", p.kind, p.weight)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestFailure {
    pub id: String,
    pub path: PathBuf,
    pub error: String,
}

/// Items that were extracted successfully, their feature rows (same order),
/// and the ones that were not.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub items: Vec<CorpusItem>,
    pub rows: Vec<Vec<f64>>,
    pub failures: Vec<IngestFailure>,
}

/// Loads and extracts every item in parallel. Per-item failures are collected
/// rather than aborting the run.
pub fn ingest_corpus(items: &[CorpusItem], assembly: &FeatureAssembly) -> Result<Ingested> {
    assembly.validate()?;
    let results: Vec<Result<Vec<f64>>> = items
        .par_iter()
        .map(|item| {
            let signal = audio::load_wav(&item.path, LoadMode::Convert)?;
            assembly.extract(&signal)
        })
        .collect();
    let mut out = Ingested {
        items: Vec::new(),
        rows: Vec::new(),
        failures: Vec::new(),
    };
    for (item, result) in items.iter().zip(results) {
        match result {
            Ok(row) => {
                out.items.push(item.clone());
                out.rows.push(row);
            }
            Err(e) => out.failures.push(IngestFailure {
                id: item.id.clone(),
                path: item.path.clone(),
                error: e.to_string(),
            }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum PcaMode {
    /// Keep the fewest components whose cumulative variance ratio reaches τ.
    Variance(f64),
    /// Keep exactly this many components.
    Fixed(usize),
    /// No reduction: vectors are used as extracted.
    Identity,
}

impl FromStr for PcaMode {
    type Err = Error;

    /// `var:0.99`, `dim:114` or `identity`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("identity") || s.eq_ignore_ascii_case("none") {
            return Ok(PcaMode::Identity);
        }
        let bad = || {
            Error::param(
                "pca",
                format!("expected var:<ratio>, dim:<count> or identity, got `{s}`"),
            )
        };
        let (mode, value) = s.split_once(':').ok_or_else(bad)?;
        let mode = match mode {
            "var" | "variance" => PcaMode::Variance(value.parse().map_err(|_| bad())?),
            "dim" | "fixed" => PcaMode::Fixed(value.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        mode.validate()?;
        Ok(mode)
    }
}

impl fmt::Display for PcaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PcaMode::Variance(t) => write!(f, "var:{t}"),
            PcaMode::Fixed(n) => write!(f, "dim:{n}"),
            PcaMode::Identity => f.write_str("identity"),
        }
    }
}

impl PcaMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PcaMode::Variance(t) if !(t > 0.0 && t <= 1.0) => {
                Err(Error::param("pca", "variance ratio must lie in (0, 1]"))
            }
            PcaMode::Fixed(0) => Err(Error::param("pca", "dimension must be >= 1")),
            _ => Ok(()),
        }
    }
}

/// Mean-centred projection onto leading covariance eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mode: PcaMode,
    pub mean: Vec<f64>,
    /// `L2` orthonormal rows of length `dim_in` (empty in identity mode).
    pub components: Vec<Vec<f64>>,
    /// Variance fraction of each kept component.
    pub explained_ratio: Vec<f64>,
}

impl PcaModel {
    pub fn identity(dim: usize) -> Self {
        PcaModel {
            mode: PcaMode::Identity,
            mean: vec![0.0; dim],
            components: Vec::new(),
            explained_ratio: Vec::new(),
        }
    }

    pub fn dim_in(&self) -> usize {
        self.mean.len()
    }

    pub fn dim_out(&self) -> usize {
        match self.mode {
            PcaMode::Identity => self.mean.len(),
            _ => self.components.len(),
        }
    }

    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim_in() {
            return Err(Error::LengthMismatch(format!(
                "vector has {} values, model expects {}",
                v.len(),
                self.dim_in()
            )));
        }
        if self.mode == PcaMode::Identity {
            return Ok(v.to_vec());
        }
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(v).zip(&self.mean).map(|((c, x), m)| c * (x - m)).sum())
            .collect())
    }

    /// Maps a reduced vector back into the original space.
    pub fn reconstruct(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim_out() {
            return Err(Error::LengthMismatch(format!(
                "vector has {} values, model produces {}",
                z.len(),
                self.dim_out()
            )));
        }
        if self.mode == PcaMode::Identity {
            return Ok(z.to_vec());
        }
        let mut out = self.mean.clone();
        for (c, &w) in self.components.iter().zip(z) {
            for (o, ci) in out.iter_mut().zip(c) {
                *o += w * ci;
            }
        }
        Ok(out)
    }

    /// Checks orthonormality and the variance-ratio ordering.
    pub fn validate(&self) -> Result<()> {
        if self.mode == PcaMode::Identity {
            return Ok(());
        }
        let d = self.dim_in();
        if self.components.iter().any(|c| c.len() != d) || self.explained_ratio.len() != self.components.len() {
            return Err(Error::Invariant("PCA component shapes disagree".into()));
        }
        for (i, a) in self.components.iter().enumerate() {
            for (j, b) in self.components.iter().enumerate().skip(i) {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot - target).abs() > 1e-6 {
                    return Err(Error::Invariant(format!("components {i},{j} have dot product {dot}")));
                }
            }
        }
        if self.explained_ratio.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Invariant("explained ratios must be nonincreasing".into()));
        }
        if self.explained_ratio.iter().sum::<f64>() > 1.0 + 1e-9 {
            return Err(Error::Invariant("explained ratios sum above 1".into()));
        }
        Ok(())
    }
}

pub fn pca_fit(rows: &[Vec<f64>], mode: PcaMode) -> Result<PcaModel> {
    mode.validate()?;
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::LengthMismatch("PCA rows must share a nonzero dimension".into()));
    }
    if mode == PcaMode::Identity {
        return Ok(PcaModel::identity(d));
    }
    if n < 2 {
        return Err(Error::param("pca", format!("need at least 2 rows to fit, got {n}")));
    }
    if let PcaMode::Fixed(l2) = mode {
        if l2 > (n - 1).min(d) {
            return Err(Error::param(
                "pca",
                format!("dimension {l2} exceeds min(rows - 1, features) = {}", (n - 1).min(d)),
            ));
        }
    }

    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();
    let ratios: Vec<f64> = values
        .iter()
        .map(|v| if total > 0.0 { v / total } else { 0.0 })
        .collect();

    let keep = match mode {
        PcaMode::Fixed(l2) => l2,
        PcaMode::Variance(tau) => {
            if !(total > 0.0) || ratios.iter().all(|r| !r.is_finite()) {
                return Err(Error::ZeroVariance);
            }
            let mut cum = 0.0;
            let mut keep = d;
            for (i, r) in ratios.iter().enumerate() {
                cum += r;
                if cum + 1e-12 >= tau {
                    keep = i + 1;
                    break;
                }
            }
            keep
        }
        PcaMode::Identity => unreachable!(),
    };

    let components = order[..keep]
        .iter()
        .map(|&i| {
            let mut c: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            // Sign is arbitrary; make the largest-magnitude coordinate positive.
            let pivot = c
                .iter()
                .enumerate()
                .fold(0, |best, (j, v)| if v.abs() > c[best].abs() { j } else { best });
            if c[pivot] < 0.0 {
                c.iter_mut().for_each(|x| *x = -*x);
            }
            c
        })
        .collect();
    let model = PcaModel {
        mode,
        mean,
        components,
        explained_ratio: ratios[..keep].to_vec(),
    };
    Ok(model)
}

/// A scored search hit.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub id: String,
    pub distance: f64,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Reduced vectors of a corpus, ready for exhaustive k-NN search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchIndex {
    pub assembly: FeatureAssembly,
    pub pca: PcaModel,
    pub items: Vec<CorpusItem>,
    pub vectors: Vec<Vec<f64>>,
}

impl SearchIndex {
    /// Fits PCA on the rows whose ids are in `fit_ids` (all rows if `None`)
    /// and projects every row.
    pub fn build(
        ingested: Ingested,
        assembly: FeatureAssembly,
        mode: PcaMode,
        fit_ids: Option<&[String]>,
    ) -> Result<Self> {
        let Ingested { items, rows, .. } = ingested;
        if items.is_empty() {
            return Err(Error::param("corpus", "no items could be ingested"));
        }
        let pca = match fit_ids {
            None => pca_fit(&rows, mode)?,
            Some(ids) => {
                let position: HashMap<&str, usize> =
                    items.iter().enumerate().map(|(i, it)| (it.id.as_str(), i)).collect();
                let subset = ids
                    .iter()
                    .map(|id| {
                        position
                            .get(id.as_str())
                            .map(|&i| rows[i].clone())
                            .ok_or_else(|| Error::UnknownId(id.clone()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                pca_fit(&subset, mode)?
            }
        };
        let vectors = rows.iter().map(|r| pca.project(r)).collect::<Result<Vec<_>>>()?;
        let index = SearchIndex {
            assembly,
            pca,
            items,
            vectors,
        };
        index.validate()?;
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn position(&self, id: &str) -> Result<usize> {
        self.items
            .iter()
            .position(|it| it.id == id)
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    /// Nearest neighbours of a reduced vector, ascending by distance with
    /// ties broken by id. `exclude` drops one id from the candidates.
    pub fn query_vector(&self, z: &[f64], k: usize, exclude: Option<&str>) -> Result<Vec<Neighbor>> {
        if z.len() != self.pca.dim_out() {
            return Err(Error::LengthMismatch(format!(
                "query has {} values, index holds {}",
                z.len(),
                self.pca.dim_out()
            )));
        }
        let available = self.len() - usize::from(exclude.is_some_and(|id| self.items.iter().any(|it| it.id == id)));
        if k == 0 {
            return Err(Error::param("k", "must be at least 1"));
        }
        if k > available {
            return Err(Error::param(
                "k",
                format!("{k} exceeds the {available} searchable items"),
            ));
        }
        let mut hits: Vec<Neighbor> = self
            .items
            .iter()
            .zip(&self.vectors)
            .filter(|(it, _)| Some(it.id.as_str()) != exclude)
            .map(|(it, v)| Neighbor {
                id: it.id.clone(),
                distance: euclidean(z, v),
            })
            .collect();
        hits.sort_by(|a, b| match a.distance.total_cmp(&b.distance) {
            Ordering::Equal => a.id.cmp(&b.id),
            o => o,
        });
        hits.truncate(k);
        Ok(hits)
    }

    pub fn query_id(&self, id: &str, k: usize, exclude_self: bool) -> Result<Vec<Neighbor>> {
        let i = self.position(id)?;
        self.query_vector(&self.vectors[i], k, exclude_self.then_some(id))
    }

    /// Extracts and projects an unindexed signal, then searches.
    pub fn query_signal(&self, signal: &Signal, k: usize) -> Result<Vec<Neighbor>> {
        let raw = self.assembly.extract(signal)?;
        let z = self.pca.project(&raw)?;
        self.query_vector(&z, k, None)
    }

    pub fn validate(&self) -> Result<()> {
        self.assembly.validate()?;
        self.pca.validate()?;
        if self.pca.dim_in() != self.assembly.total_dim() {
            return Err(Error::Invariant(format!(
                "PCA input dimension {} does not match assembly dimension {}",
                self.pca.dim_in(),
                self.assembly.total_dim()
            )));
        }
        if self.vectors.len() != self.items.len() {
            return Err(Error::Invariant("one vector per item required".into()));
        }
        let d = self.pca.dim_out();
        if self.vectors.iter().any(|v| v.len() != d) {
            return Err(Error::Invariant(format!("every vector must have {d} values")));
        }
        let mut seen = HashSet::new();
        if !self.items.iter().all(|it| seen.insert(it.id.as_str())) {
            return Err(Error::Invariant("duplicate item id".into()));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct PcaHeader {
    mode: PcaMode,
    dim_in: usize,
    dim_out: usize,
}

#[derive(Serialize, Deserialize)]
struct PayloadHeader {
    encoding: String,
    len_bytes: u64,
    sha256: String,
}

#[derive(Serialize, Deserialize)]
struct IndexHeader {
    format: String,
    format_version: u64,
    assembly: FeatureAssembly,
    pca: PcaHeader,
    items: Vec<CorpusItem>,
    payload: PayloadHeader,
}

/// Serializes the index: one JSON header line, then a little-endian f64
/// payload holding the PCA mean, explained ratios, components and the
/// reduced vectors, in that order.
pub fn encode_index(index: &SearchIndex) -> Result<Vec<u8>> {
    index.validate()?;
    let mut payload = Vec::new();
    let mut put = |xs: &[f64]| xs.iter().for_each(|x| payload.extend_from_slice(&x.to_le_bytes()));
    put(&index.pca.mean);
    put(&index.pca.explained_ratio);
    index.pca.components.iter().for_each(|c| put(c));
    index.vectors.iter().for_each(|v| put(v));

    let header = IndexHeader {
        format: INDEX_MAGIC.into(),
        format_version: INDEX_VERSION,
        assembly: index.assembly.clone(),
        pca: PcaHeader {
            mode: index.pca.mode,
            dim_in: index.pca.dim_in(),
            dim_out: index.pca.dim_out(),
        },
        items: index.items.clone(),
        payload: PayloadHeader {
            encoding: "f64le".into(),
            len_bytes: payload.len() as u64,
            sha256: hex::encode(Sha256::digest(&payload)),
        },
    };
    let mut out = serde_json::to_vec(&header).map_err(|e| Error::malformed("index", e))?;
    out.push(b'\n');
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode_index(bytes: &[u8]) -> Result<SearchIndex> {
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::malformed("index", "missing header line"))?;
    let (head, payload) = (&bytes[..split], &bytes[split + 1..]);
    let raw: serde_json::Value = serde_json::from_slice(head).map_err(|e| Error::malformed("index", e))?;
    if raw.get("format").and_then(|v| v.as_str()) != Some(INDEX_MAGIC) {
        return Err(Error::malformed("index", "not a fracsig index"));
    }
    let version = raw
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::malformed("index", "format_version missing"))?;
    if version != INDEX_VERSION {
        return Err(Error::Version {
            found: version,
            expected: vec![INDEX_VERSION],
        });
    }
    let header: IndexHeader = serde_json::from_value(raw).map_err(|e| Error::malformed("index", e))?;
    if header.payload.encoding != "f64le" {
        return Err(Error::malformed(
            "index",
            format!("unknown payload encoding `{}`", header.payload.encoding),
        ));
    }
    if payload.len() as u64 != header.payload.len_bytes {
        return Err(Error::Checksum(format!(
            "payload is {} bytes, header declares {}",
            payload.len(),
            header.payload.len_bytes
        )));
    }
    if hex::encode(Sha256::digest(payload)) != header.payload.sha256 {
        return Err(Error::Checksum("payload sha256 does not match header".into()));
    }

    let PcaHeader { mode, dim_in, dim_out } = header.pca;
    mode.validate()?;
    let n = header.items.len();
    let n_components = if mode == PcaMode::Identity { 0 } else { dim_out };
    let expected = dim_in
        .checked_add(n_components)
        .and_then(|x| n_components.checked_mul(dim_in)?.checked_add(x))
        .and_then(|x| n.checked_mul(dim_out)?.checked_add(x))
        .and_then(|x| x.checked_mul(8))
        .ok_or_else(|| Error::malformed("index", "declared dimensions overflow"))?;
    if payload.len() != expected {
        return Err(Error::malformed(
            "index",
            format!("payload holds {} bytes, dimensions imply {expected}", payload.len()),
        ));
    }
    if mode == PcaMode::Identity && dim_in != dim_out {
        return Err(Error::malformed("index", "identity PCA must keep the input dimension"));
    }
    let mut floats = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let mut take = |count: usize| -> Vec<f64> { floats.by_ref().take(count).collect() };
    let mean = take(dim_in);
    let explained_ratio = take(n_components);
    let components = (0..n_components).map(|_| take(dim_in)).collect();
    let vectors = (0..n).map(|_| take(dim_out)).collect();
    let index = SearchIndex {
        assembly: header.assembly,
        pca: PcaModel {
            mode,
            mean,
            components,
            explained_ratio,
        },
        items: header.items,
        vectors,
    };
    index.validate()?;
    Ok(index)
}

pub fn save_index(index: &SearchIndex, path: &Path) -> Result<()> {
    let bytes = encode_index(index)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_index(path: &Path) -> Result<SearchIndex> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_index(&bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Mean Jaccard similarity of tag sets over the top-n results.
    Si,
    /// Fraction of the top-k results sharing the query's label.
    Precision,
}

impl FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "si" => Ok(EvalMode::Si),
            "precision" => Ok(EvalMode::Precision),
            _ => Err(Error::param("mode", format!("expected si or precision, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub query_id: String,
    pub rank: usize,
    pub neighbor_id: String,
    pub distance: f64,
    /// Jaccard similarity (si) or 1/0 label match (precision).
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub rows: Vec<EvalRow>,
    /// Mean over queries of the top-k score, per requested k.
    pub aggregate: BTreeMap<usize, f64>,
}

/// Leave-one-out evaluation: every item queries the rest of the index.
/// Pairs whose tag sets are both empty score 0 in si mode.
pub fn evaluate(index: &SearchIndex, mode: EvalMode, ks: &[usize], stopwords: &[String]) -> Result<EvalReport> {
    let k_max = ks
        .iter()
        .copied()
        .max()
        .ok_or_else(|| Error::param("k", "at least one k is required"))?;
    if ks.contains(&0) {
        return Err(Error::param("k", "must be at least 1"));
    }
    if index.len() < 2 {
        return Err(Error::param("corpus", "evaluation needs at least two items"));
    }
    if k_max > index.len() - 1 {
        return Err(Error::param(
            "k",
            format!("{k_max} exceeds the {} non-self neighbours available", index.len() - 1),
        ));
    }

    let tags: Vec<TagSet> = match mode {
        EvalMode::Si => index
            .items
            .iter()
            .map(|it| {
                it.tags
                    .as_ref()
                    .map(|t| metrics::normalize_tags(t, stopwords))
                    .ok_or_else(|| Error::MissingAnnotations(format!("item `{}` has no tags", it.id)))
            })
            .collect::<Result<_>>()?,
        EvalMode::Precision => {
            if let Some(it) = index.items.iter().find(|it| it.label.is_none()) {
                return Err(Error::MissingAnnotations(format!("item `{}` has no label", it.id)));
            }
            Vec::new()
        }
    };

    let per_query: Vec<Vec<EvalRow>> = (0..index.len())
        .into_par_iter()
        .map(|q| {
            let query = &index.items[q];
            let hits = index.query_vector(&index.vectors[q], k_max, Some(&query.id))?;
            hits.into_iter()
                .enumerate()
                .map(|(r, hit)| {
                    let n = index.position(&hit.id)?;
                    let score = match mode {
                        EvalMode::Si => match metrics::jaccard_si(&tags[q], &tags[n]) {
                            Ok(si) => si,
                            Err(Error::Undefined(_)) => 0.0,
                            Err(e) => return Err(e),
                        },
                        EvalMode::Precision => f64::from(u8::from(index.items[n].label == query.label)),
                    };
                    Ok(EvalRow {
                        query_id: query.id.clone(),
                        rank: r + 1,
                        neighbor_id: hit.id,
                        distance: hit.distance,
                        score,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut aggregate = BTreeMap::new();
    for &k in ks {
        let mean = per_query
            .iter()
            .map(|rows| rows[..k].iter().map(|r| r.score).sum::<f64>() / k as f64)
            .sum::<f64>()
            / per_query.len() as f64;
        aggregate.insert(k, mean);
    }
    Ok(EvalReport {
        mode,
        rows: per_query.into_iter().flatten().collect(),
        aggregate,
    })
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_number(x: f64) -> String {
    format!("{x}")
}

impl EvalReport {
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("query_id,rank,neighbor_id,distance,si_or_match\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                csv_field(&r.query_id),
                r.rank,
                csv_field(&r.neighbor_id),
                format_number(r.distance),
                format_number(r.score)
            ));
        }
        out
    }

    pub fn aggregate_csv(&self) -> String {
        let metric = match self.mode {
            EvalMode::Si => "mean_si",
            EvalMode::Precision => "mean_precision",
        };
        let mut out = format!("k,{metric}\n");
        for (k, v) in &self.aggregate {
            out.push_str(&format!("{k},{}\n", format_number(*v)));
        }
        out
    }
}

/// Quotes a CSV field when it contains a delimiter, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(id: &str, label: &str) -> CorpusItem {
        CorpusItem {
            id: id.into(),
            path: PathBuf::from(format!("{id}.wav")),
            tags: None,
            label: Some(label.into()),
        }
    }

    fn index_of(points: &[(&str, &str, Vec<f64>)]) -> SearchIndex {
        let dim = points[0].2.len();
        SearchIndex {
            assembly: FeatureAssembly::single(FeatureKind::MfdVl),
            pca: PcaModel::identity(dim),
            items: points.iter().map(|(id, l, _)| item(id, l)).collect(),
            vectors: points.iter().map(|p| p.2.clone()).collect(),
        }
    }

    #[test]
    fn corpus_parsing() {
        let text = r#"{"id":"a","path":"x/a.wav","tags":["Rain"]}

{"id":"b","path":"/abs/b.wav","label":"dog"}
"#;
        let items = parse_corpus(text, Path::new("/data")).unwrap();
        assert_eq!(items[0].path, PathBuf::from("/data/x/a.wav"));
        assert_eq!(items[1].path, PathBuf::from("/abs/b.wav"));
        let dup = "{\"id\":\"a\",\"path\":\"a\",\"label\":\"x\"}\n{\"id\":\"a\",\"path\":\"b\",\"label\":\"x\"}";
        assert!(parse_corpus(dup, Path::new("")).is_err());
        assert!(parse_corpus("{\"id\":\"a\",\"path\":\"a\"}", Path::new("")).is_err());
        assert!(parse_corpus("not json", Path::new("")).is_err());
        assert!(parse_corpus("", Path::new("")).is_err());
    }

    #[test]
    fn assembly_parsing() {
        let a = FeatureAssembly::parse("mfcc13:1.0, mfd-vl:2,emfd_kde").unwrap();
        assert_eq!(a.parts.len(), 3);
        assert_eq!(
            a.parts[1],
            FeaturePart {
                kind: FeatureKind::MfdVl,
                weight: 2.0
            }
        );
        assert_eq!(a.parts[2].weight, 1.0);
        assert_eq!(a.total_dim(), 13 + 10 + 512);
        assert_eq!(FeatureAssembly::parse(&a.to_string()).unwrap(), a);
        for bad in ["", "mfd-vl:-1", "mfd-vl:nan", "nope", "mfd-vl,mfd-vl", "mfd-vl:"] {
            assert!(FeatureAssembly::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn pca_mode_parsing() {
        assert_eq!("var:0.99".parse::<PcaMode>().unwrap(), PcaMode::Variance(0.99));
        assert_eq!("dim:114".parse::<PcaMode>().unwrap(), PcaMode::Fixed(114));
        assert_eq!("identity".parse::<PcaMode>().unwrap(), PcaMode::Identity);
        for bad in ["var:0", "var:1.5", "dim:0", "dim:x", "pca"] {
            assert!(bad.parse::<PcaMode>().is_err(), "{bad}");
        }
    }

    #[test]
    fn rank_one_data_keeps_one_component() {
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|i| {
                let t = i as f64 - 3.0;
                vec![1.0 + t, 2.0 - 2.0 * t, 0.5 * t]
            })
            .collect();
        let model = pca_fit(&rows, PcaMode::Variance(0.99)).unwrap();
        assert_eq!(model.dim_out(), 1);
        model.validate().unwrap();
        let c = &model.components[0];
        let norm = (1.0f64 + 4.0 + 0.25).sqrt();
        // Largest-magnitude coordinate (the second) is positive.
        for (got, want) in c.iter().zip([-1.0 / norm, 2.0 / norm, -0.5 / norm]) {
            assert!((got - want).abs() < 1e-9);
        }
        assert!(model.project(&model.mean).unwrap().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn zero_variance_is_reported() {
        let rows = vec![vec![1.0, 2.0]; 4];
        assert!(matches!(
            pca_fit(&rows, PcaMode::Variance(0.9)),
            Err(Error::ZeroVariance)
        ));
        assert!(pca_fit(&rows[..1], PcaMode::Fixed(1)).is_err());
        assert!(pca_fit(&rows, PcaMode::Fixed(4)).is_err());
    }

    #[test]
    fn knn_ordering_and_ties() {
        let idx = index_of(&[
            ("c", "x", vec![1.0, 0.0]),
            ("a", "x", vec![0.0, 0.0]),
            ("b", "y", vec![-1.0, 0.0]),
        ]);
        let hits = idx.query_id("a", 3, false).unwrap();
        let ids: Vec<_> = hits.iter().map(|h| h.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(hits[0].distance, 0.0);
        let hits = idx.query_id("a", 2, true).unwrap();
        assert_eq!(hits[0].id, "b");
        assert!(idx.query_id("a", 3, true).is_err());
        assert!(idx.query_id("a", 4, false).is_err());
        assert!(matches!(idx.query_id("zz", 1, false), Err(Error::UnknownId(_))));
    }

    #[test]
    fn index_bytes_round_trip_and_tamper() {
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|i| (0..10).map(|j| ((i * 7 + j * 3) % 5) as f64 + 0.1 * j as f64).collect())
            .collect();
        let items: Vec<CorpusItem> = (0..6).map(|i| item(&format!("s{i}"), "x")).collect();
        let idx = SearchIndex::build(
            Ingested {
                items,
                rows,
                failures: vec![],
            },
            FeatureAssembly::single(FeatureKind::MfdVl),
            PcaMode::Fixed(2),
            None,
        )
        .unwrap();
        let bytes = encode_index(&idx).unwrap();
        assert_eq!(decode_index(&bytes).unwrap(), idx);
        assert!(matches!(
            decode_index(&bytes[..bytes.len() - 3]),
            Err(Error::Checksum(_))
        ));
        let mut flipped = bytes.clone();
        *flipped.last_mut().unwrap() ^= 1;
        assert!(matches!(decode_index(&flipped), Err(Error::Checksum(_))));
        let text = String::from_utf8_lossy(&bytes).replacen("\"format_version\":1", "\"format_version\":9", 1);
        let mut bumped = text.as_bytes()[..bytes.iter().position(|&b| b == b'\n').unwrap() + 1].to_vec();
        bumped.extend_from_slice(&bytes[bytes.iter().position(|&b| b == b'\n').unwrap() + 1..]);
        assert!(matches!(decode_index(&bumped), Err(Error::Version { found: 9, .. })));
    }

    #[test]
    fn evaluation_modes() {
        let idx = index_of(&[
            ("a1", "a", vec![0.0]),
            ("a2", "a", vec![0.1]),
            ("b1", "b", vec![5.0]),
            ("b2", "b", vec![5.2]),
        ]);
        let report = evaluate(&idx, EvalMode::Precision, &[1], &[]).unwrap();
        assert_eq!(report.aggregate[&1], 1.0);
        assert_eq!(report.rows.len(), 4);
        assert!(report.rows.iter().all(|r| r.query_id != r.neighbor_id));
        assert!(report
            .rows_csv()
            .starts_with("query_id,rank,neighbor_id,distance,si_or_match\n"));
        assert!(matches!(
            evaluate(&idx, EvalMode::Si, &[1], &[]),
            Err(Error::MissingAnnotations(_))
        ));
        assert!(evaluate(&idx, EvalMode::Precision, &[4], &[]).is_err());
        let single = index_of(&[("a", "a", vec![0.0])]);
        assert!(evaluate(&single, EvalMode::Precision, &[1], &[]).is_err());
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
        assert_eq!(format_number(0.1), "0.1");
        assert_eq!(format_number(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
