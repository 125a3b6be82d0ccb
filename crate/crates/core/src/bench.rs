//! Benchmark harness: distortion sweeps, agreement estimation, and
//! inclusion/deletion precision-recall over a pool.
//!
//! Every experiment is a pure function of (pool, seeds, config); rows come
//! out in a deterministic order regardless of thread count.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{apply, ChannelOp, ChannelOpKind};
use crate::error::{Error, Result};
use crate::exec;
use crate::imaging::load_image;
use crate::phylogeny::{list_images, PhyloNode, Pool};
use crate::prng::SplitMix64;
use crate::projector::{agreement, Projector, Trait};
use crate::stego::StegoSystem;
use crate::theory::format_sig;

/// One report row: a metric value at one sweep position.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub experiment: String,
    pub op: String,
    pub severity: f64,
    pub projector: String,
    pub stego: String,
    pub metric: String,
    pub value: f64,
    pub samples: u64,
}

/// Report metadata tying rows to their inputs.
#[derive(Clone, Debug, Serialize)]
pub struct BenchMeta {
    pub manifest_sha256: String,
    pub master_seed: u64,
    pub created: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub meta: BenchMeta,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn new(manifest_sha256: String, master_seed: u64) -> Self {
        Self {
            meta: BenchMeta {
                manifest_sha256,
                master_seed,
                created: crate::phylogeny::creation_stamp(),
            },
            rows: Vec::new(),
        }
    }

    /// CSV with rows sorted by (experiment, op, severity, projector,
    /// stego, metric); metrics carry 6 significant digits.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<&BenchRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            a.experiment
                .cmp(&b.experiment)
                .then(a.op.cmp(&b.op))
                .then(a.severity.partial_cmp(&b.severity).unwrap())
                .then(a.projector.cmp(&b.projector))
                .then(a.stego.cmp(&b.stego))
                .then(a.metric.cmp(&b.metric))
        });
        let mut out = String::from("experiment,op,severity,projector,stego,metric,value,samples\n");
        for row in rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                row.experiment,
                row.op,
                row.severity,
                row.projector,
                row.stego,
                row.metric,
                format_sig(row.value, 6),
                row.samples
            ));
        }
        out
    }
}

/// SHA-256 of a manifest file, hex-encoded; recorded in report metadata.
pub fn manifest_hash(manifest_path: &Path) -> Result<String> {
    let bytes = std::fs::read(manifest_path).map_err(|cause| Error::Io {
        path: manifest_path.into(),
        cause,
    })?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn queries(pool: &Pool) -> Vec<(usize, &PhyloNode)> {
    pool.manifest
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.parent_id.is_some())
        .collect()
}

fn node_op(kind: ChannelOpKind, severity: f64, op_seed: u64, node_index: usize) -> ChannelOp {
    ChannelOp::with_seed(kind, severity, op_seed ^ node_index as u64)
}

/// Mean bit agreement between each non-root node's recorded embedded trait
/// and the trait extracted after applying `kind` at each severity.
pub fn estimate_stego_agreement(
    pool: &Pool,
    kind: ChannelOpKind,
    severities: &[f64],
    stego: &StegoSystem,
    key_seed: u64,
    op_seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let queries = queries(pool);
    if queries.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut out = Vec::with_capacity(severities.len());
    for &severity in severities {
        let rates = exec::map_slice(&queries, |&(idx, node)| -> Result<f64> {
            let img = load_image(&pool.node_path(node))?;
            let embedded = Trait::from_hex(node.trait_embedded.as_ref().expect("non-root"))?;
            let edited = apply(&img, &node_op(kind, severity, op_seed, idx))?;
            let read = stego.extract_with_seed(&edited, key_seed, embedded.len())?;
            agreement(&embedded, &read)
        });
        let rates = rates.into_iter().collect::<Result<Vec<_>>>()?;
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        out.push((severity, mean));
    }
    Ok(out)
}

/// Mean pairwise trait agreement over all unordered pairs of images.
pub fn estimate_projector_agreement(images: &[PathBuf], projector: &Projector) -> Result<f64> {
    if images.len() < 2 {
        return Err(Error::InvalidParam(
            "projector agreement needs at least two images".into(),
        ));
    }
    let traits = exec::map_slice(images, |path| -> Result<Trait> {
        projector.project(&load_image(path)?, Some(path))
    });
    let traits = traits.into_iter().collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    let mut pairs = 0u64;
    for i in 0..traits.len() {
        for j in i + 1..traits.len() {
            total += agreement(&traits[i], &traits[j])?;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Top-1 retrieval accuracy with every pool image edited at each severity;
/// nomination is argmax agreement with no abstention threshold.
pub fn run_distortion_retrieval(
    pool: &Pool,
    kind: ChannelOpKind,
    severities: &[f64],
    projector: &Projector,
    stego: &StegoSystem,
    key_seed: u64,
    op_seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let nodes = &pool.manifest.nodes;
    if nodes.iter().all(|n| n.parent_id.is_none()) {
        return Err(Error::EmptyPool);
    }
    let n_bits = projector.spec().bits();
    let mut out = Vec::with_capacity(severities.len());
    for &severity in severities {
        // One pass per node: the edited image yields both its candidate
        // trait and, for non-roots, the extracted query trait.
        struct Scored {
            candidate: Trait,
            extracted: Option<Trait>,
        }
        let scored = exec::map_range(nodes.len(), |idx| -> Result<Scored> {
            let node = &nodes[idx];
            let img = load_image(&pool.node_path(node))?;
            let edited = apply(&img, &node_op(kind, severity, op_seed, idx))?;
            let path = pool.node_path(node);
            let candidate = projector.project(&edited, Some(&path))?;
            let extracted = if node.parent_id.is_some() {
                Some(stego.extract_with_seed(&edited, key_seed, n_bits)?)
            } else {
                None
            };
            Ok(Scored {
                candidate,
                extracted,
            })
        });
        let scored = scored.into_iter().collect::<Result<Vec<_>>>()?;
        let hits = exec::sum_range(nodes.len(), |qi| {
            let Some(extracted) = scored[qi].extracted.as_ref() else {
                return 0;
            };
            let mut best: Option<(f64, &str)> = None;
            for (ci, node) in nodes.iter().enumerate() {
                let s = agreement(extracted, &scored[ci].candidate)
                    .expect("traits share one projector");
                let better = match best {
                    None => true,
                    Some((bs, bid)) => s > bs || (s == bs && node.id.as_str() < bid),
                };
                if better {
                    best = Some((s, node.id.as_str()));
                }
            }
            let nominated = best.map(|(_, id)| id);
            (nominated == nodes[qi].parent_id.as_deref()) as u64
        });
        let query_count = nodes.iter().filter(|n| n.parent_id.is_some()).count();
        out.push((severity, hits as f64 / query_count as f64));
    }
    Ok(out)
}

/// One precision-recall measurement.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PRPoint {
    pub ratio: f64,
    pub threshold: f64,
    pub precision: f64,
    /// Absent when no true pairs survive (denominator zero).
    pub recall: Option<f64>,
    /// Absent whenever recall is.
    pub f_score: Option<f64>,
    pub claimed: u64,
    pub true_pairs: u64,
    pub hits: u64,
    /// Set when nothing was claimed; precision is then reported as 1.0.
    pub empty_claims: bool,
}

fn pr_point(ratio: f64, threshold: f64, claimed: u64, true_pairs: u64, hits: u64) -> PRPoint {
    let empty_claims = claimed == 0;
    let precision = if empty_claims {
        1.0
    } else {
        hits as f64 / claimed as f64
    };
    let recall = (true_pairs > 0).then(|| hits as f64 / true_pairs as f64);
    let f_score = recall.map(|r| {
        if precision + r > 0.0 {
            2.0 * precision * r / (precision + r)
        } else {
            0.0
        }
    });
    PRPoint {
        ratio,
        threshold,
        precision,
        recall,
        f_score,
        claimed,
        true_pairs,
        hits,
        empty_claims,
    }
}

/// CSV for PR points: `experiment,ratio,threshold,precision,recall,f_score,
/// claimed,true_pairs,hits,empty_claims`; undefined metrics are left empty.
pub fn pr_to_csv(experiment: &str, points: &[PRPoint]) -> String {
    let mut out = String::from(
        "experiment,ratio,threshold,precision,recall,f_score,claimed,true_pairs,hits,empty_claims\n",
    );
    for p in points {
        let opt = |v: Option<f64>| v.map(|x| format_sig(x, 6)).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            experiment,
            p.ratio,
            p.threshold,
            format_sig(p.precision, 6),
            opt(p.recall),
            opt(p.f_score),
            p.claimed,
            p.true_pairs,
            p.hits,
            p.empty_claims as u8
        ));
    }
    out
}

/// Pairwise claims with the pool diluted by extraneous images.
///
/// At ratio `r` the pool holds the whole manifest plus
/// `round(|manifest| * (1-r)/r)` extraneous images drawn without
/// replacement from a seeded shuffle of `extraneous_dir`. Samples are
/// nested across ratios, so precision cannot rise as the ratio falls while
/// recall is untouched by construction.
#[allow(clippy::too_many_arguments)]
pub fn run_inclusion(
    pool: &Pool,
    extraneous_dir: &Path,
    ratios: &[f64],
    threshold: f64,
    projector: &Projector,
    stego: &StegoSystem,
    key_seed: u64,
    sample_seed: u64,
) -> Result<Vec<PRPoint>> {
    validate_ratios(ratios)?;
    let relevant = pool.manifest.nodes.len();
    let needs: Vec<usize> = ratios
        .iter()
        .map(|&r| (relevant as f64 * (1.0 - r) / r).round() as usize)
        .collect();
    let max_need = needs.iter().copied().max().unwrap_or(0);

    let mut extraneous = list_images(extraneous_dir)?;
    if extraneous.len() < max_need {
        return Err(Error::InvalidParam(format!(
            "need {max_need} extraneous images, found {} in {}",
            extraneous.len(),
            extraneous_dir.display()
        )));
    }
    SplitMix64::new(sample_seed).shuffle(&mut extraneous);
    extraneous.truncate(max_need);

    let nodes = &pool.manifest.nodes;
    let node_traits = project_nodes(pool, projector)?;
    let extra_traits = exec::map_slice(&extraneous, |path| -> Result<Trait> {
        projector.project(&load_image(path)?, Some(path))
    });
    let extra_traits = extra_traits.into_iter().collect::<Result<Vec<_>>>()?;
    let extracted = extract_queries(pool, stego, key_seed, projector.spec().bits())?;

    let mut points = Vec::with_capacity(ratios.len());
    for (&ratio, &need) in ratios.iter().zip(&needs) {
        let extra = &extra_traits[..need];
        let (claimed, hits) = count_claims(&extracted, nodes, &node_traits, extra, threshold);
        points.push(pr_point(
            ratio,
            threshold,
            claimed,
            extracted.len() as u64,
            hits,
        ));
    }
    Ok(points)
}

/// Pairwise claims with relevant samples progressively deleted.
///
/// At ratio `r` a seeded shuffle retains the first `round(r * |manifest|)`
/// nodes; true pairs count only when both endpoints survive.
pub fn run_deletion(
    pool: &Pool,
    ratios: &[f64],
    threshold: f64,
    projector: &Projector,
    stego: &StegoSystem,
    key_seed: u64,
    sample_seed: u64,
) -> Result<Vec<PRPoint>> {
    validate_ratios(ratios)?;
    let nodes = &pool.manifest.nodes;
    let node_traits = project_nodes(pool, projector)?;
    let extracted = extract_queries(pool, stego, key_seed, projector.spec().bits())?;

    let mut order: Vec<usize> = (0..nodes.len()).collect();
    SplitMix64::new(sample_seed).shuffle(&mut order);

    let index_of: std::collections::HashMap<&str, usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.as_str(), i))
        .collect();

    let mut points = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        let keep_count = (ratio * nodes.len() as f64).round() as usize;
        let mut retained = vec![false; nodes.len()];
        for &idx in &order[..keep_count.min(nodes.len())] {
            retained[idx] = true;
        }

        let mut claimed = 0u64;
        let mut hits = 0u64;
        let mut true_pairs = 0u64;
        for q in &extracted {
            if !retained[q.node_index] {
                continue;
            }
            let parent_id = nodes[q.node_index].parent_id.as_deref().expect("query");
            if index_of.get(parent_id).is_some_and(|&i| retained[i]) {
                true_pairs += 1;
            }
            for (ci, node) in nodes.iter().enumerate() {
                if !retained[ci] {
                    continue;
                }
                let s = agreement(&q.trait_bits, &node_traits[ci])?;
                if s >= threshold {
                    claimed += 1;
                    if node.id == parent_id {
                        hits += 1;
                    }
                }
            }
        }
        points.push(pr_point(ratio, threshold, claimed, true_pairs, hits));
    }
    Ok(points)
}

fn validate_ratios(ratios: &[f64]) -> Result<()> {
    if ratios.is_empty() {
        return Err(Error::InvalidParam("no ratios given".into()));
    }
    for &r in ratios {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::InvalidParam(format!("ratio {r} not in (0, 1]")));
        }
    }
    Ok(())
}

fn project_nodes(pool: &Pool, projector: &Projector) -> Result<Vec<Trait>> {
    let results = exec::map_slice(&pool.manifest.nodes, |node| -> Result<Trait> {
        let path = pool.node_path(node);
        projector.project(&load_image(&path)?, Some(&path))
    });
    results.into_iter().collect()
}

struct ExtractedQuery {
    node_index: usize,
    trait_bits: Trait,
}

fn extract_queries(
    pool: &Pool,
    stego: &StegoSystem,
    key_seed: u64,
    n_bits: usize,
) -> Result<Vec<ExtractedQuery>> {
    let indices: Vec<usize> = pool
        .manifest
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.parent_id.is_some())
        .map(|(i, _)| i)
        .collect();
    if indices.is_empty() {
        return Err(Error::EmptyPool);
    }
    let results = exec::map_slice(&indices, |&node_index| -> Result<ExtractedQuery> {
        let node = &pool.manifest.nodes[node_index];
        let img = load_image(&pool.node_path(node))?;
        let trait_bits = stego.extract_with_seed(&img, key_seed, n_bits)?;
        Ok(ExtractedQuery {
            node_index,
            trait_bits,
        })
    });
    results.into_iter().collect()
}

/// Count threshold claims of queries against manifest nodes plus
/// extraneous candidates; returns (claimed, hits-on-true-pairs).
fn count_claims(
    extracted: &[ExtractedQuery],
    nodes: &[PhyloNode],
    node_traits: &[Trait],
    extra_traits: &[Trait],
    threshold: f64,
) -> (u64, u64) {
    let per_query = exec::map_slice(extracted, |q| {
        let mut claimed = 0u64;
        let mut hits = 0u64;
        let parent_id = nodes[q.node_index].parent_id.as_deref().expect("query");
        for (ci, node) in nodes.iter().enumerate() {
            let s = agreement(&q.trait_bits, &node_traits[ci]).expect("same projector");
            if s >= threshold {
                claimed += 1;
                if node.id == parent_id {
                    hits += 1;
                }
            }
        }
        for t in extra_traits {
            if agreement(&q.trait_bits, t).expect("same projector") >= threshold {
                claimed += 1;
            }
        }
        (claimed, hits)
    });
    per_query
        .into_iter()
        .fold((0, 0), |(c, h), (dc, dh)| (c + dc, h + dh))
}
