//! Forward inheritance, pool construction, and backward retrieval.
//!
//! At generation time a trait projected from the parent is embedded into
//! the offspring's cover. At enquiry time the trait extracted from a query
//! is matched against traits re-projected from every candidate in the
//! pool; the best agreement wins if it clears the threshold, otherwise the
//! parent is deemed absent.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{apply, ChannelOp, ChannelOpKind};
use crate::error::{Error, Result};
use crate::exec;
use crate::imaging::{load_image, save_image, ImageBuffer, SaveFormat};
use crate::prng::SplitMix64;
use crate::projector::{agreement, Projector, ProjectorSpec, Trait};
use crate::stego::StegoSystem;

/// One pool member: identity, file, lineage link, and embed record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhyloNode {
    pub id: String,
    /// Image file path, relative to the manifest's directory.
    pub path: String,
    pub parent_id: Option<String>,
    pub generation: u32,
    /// Stego key seed as 16 lowercase hex digits.
    pub key_seed: String,
    pub projector: ProjectorSpec,
    /// Hex trait embedded into this node (absent for roots).
    pub trait_embedded: Option<String>,
}

/// The pool description written by the tree builder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeManifest {
    pub nodes: Vec<PhyloNode>,
    pub branching: Vec<u32>,
    pub stego: StegoSystem,
    pub created: String,
}

impl TreeManifest {
    pub fn roots(&self) -> impl Iterator<Item = &PhyloNode> {
        self.nodes.iter().filter(|n| n.parent_id.is_none())
    }

    pub fn node(&self, id: &str) -> Option<&PhyloNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Stego key seed shared by the tree.
    pub fn key_seed(&self) -> Result<u64> {
        let node = self
            .nodes
            .first()
            .ok_or_else(|| Error::Manifest("manifest has no nodes".into()))?;
        u64::from_str_radix(&node.key_seed, 16)
            .map_err(|e| Error::Manifest(format!("bad key seed {:?}: {e}", node.key_seed)))
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = std::collections::HashSet::new();
        for node in &self.nodes {
            if !ids.insert(node.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate node id {:?}", node.id)));
            }
        }
        for node in &self.nodes {
            match (&node.parent_id, node.generation) {
                (None, 0) => {}
                (None, g) => {
                    return Err(Error::Manifest(format!(
                        "root {:?} has generation {g}",
                        node.id
                    )))
                }
                (Some(_), 0) => {
                    return Err(Error::Manifest(format!(
                        "node {:?} has a parent but generation 0",
                        node.id
                    )))
                }
                (Some(pid), g) => {
                    let parent = self.node(pid).ok_or_else(|| {
                        Error::Manifest(format!("node {:?}: unresolved parent {pid:?}", node.id))
                    })?;
                    if parent.generation + 1 != g {
                        return Err(Error::Manifest(format!(
                            "node {:?}: generation {g} after parent generation {}",
                            node.id, parent.generation
                        )));
                    }
                }
            }
            if node.parent_id.is_some() != node.trait_embedded.is_some() {
                return Err(Error::Manifest(format!(
                    "node {:?}: embedded trait must be present exactly for non-roots",
                    node.id
                )));
            }
        }
        if !self.branching.is_empty() {
            let roots = self.roots().count();
            let mut expected = 1u64;
            let mut cum = 1u64;
            for &b in &self.branching {
                cum *= b as u64;
                expected += cum;
            }
            if roots as u64 * expected != self.nodes.len() as u64 {
                return Err(Error::Manifest(format!(
                    "{} nodes inconsistent with {roots} roots and branching {:?}",
                    self.nodes.len(),
                    self.branching
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut json = self.to_json()?;
        json.push('\n');
        fs::write(path, json).map_err(|cause| Error::Io {
            path: path.into(),
            cause,
        })
    }
}

/// A manifest anchored to its directory, so node paths resolve.
#[derive(Clone, Debug)]
pub struct Pool {
    pub manifest: TreeManifest,
    pub dir: PathBuf,
}

impl Pool {
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let text = fs::read_to_string(manifest_path).map_err(|cause| Error::Io {
            path: manifest_path.into(),
            cause,
        })?;
        let manifest: TreeManifest = serde_json::from_str(&text)?;
        manifest.validate()?;
        let dir = manifest_path
            .parent()
            .unwrap_or(Path::new("."))
            .to_path_buf();
        Ok(Self { manifest, dir })
    }

    pub fn node_path(&self, node: &PhyloNode) -> PathBuf {
        self.dir.join(&node.path)
    }

    pub fn candidates(&self) -> Vec<Candidate> {
        self.manifest
            .nodes
            .iter()
            .map(|n| Candidate {
                id: n.id.clone(),
                path: self.node_path(n),
            })
            .collect()
    }
}

/// Timestamp for reproducible artifacts: honours SOURCE_DATE_EPOCH and
/// falls back to the epoch so identical configurations yield identical
/// bytes.
pub(crate) fn creation_stamp() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse::<i64>().ok())
        .unwrap_or(0);
    rfc3339_utc(secs)
}

pub(crate) fn rfc3339_utc(secs: i64) -> String {
    let days = secs.div_euclid(86_400);
    let rem = secs.rem_euclid(86_400);
    let (h, m, s) = (rem / 3600, (rem % 3600) / 60, rem % 60);
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    let year = yoe + era * 400 + i64::from(month <= 2);
    format!("{year:04}-{month:02}-{d:02}T{h:02}:{m:02}:{s:02}Z")
}

/// Outcome of one inheritance step.
pub struct InheritOutcome {
    pub stego: ImageBuffer,
    pub trait_embedded: Trait,
}

/// Project the parent's trait and embed it into the offspring cover.
///
/// Inheritance is independent of any resemblance between parent and cover;
/// the lineage record is carried by the embedding alone.
pub fn inherit(
    parent: &ImageBuffer,
    parent_path: Option<&Path>,
    cover: &ImageBuffer,
    projector: &Projector,
    stego: &StegoSystem,
    key_seed: u64,
) -> Result<InheritOutcome> {
    let t = projector.project(parent, parent_path)?;
    let key = stego.derive(key_seed, cover.width(), cover.height(), t.len())?;
    let stego_img = stego.embed(cover, &t, &key)?;
    Ok(InheritOutcome {
        stego: stego_img,
        trait_embedded: t,
    })
}

/// Tree construction parameters.
pub struct TreeBuildConfig {
    pub roots_dir: PathBuf,
    pub branching: Vec<u32>,
    pub projector: Projector,
    pub stego: StegoSystem,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    /// Optional directory of externally generated covers named
    /// `<child_id>.png`; when set, synthesis is skipped for children whose
    /// cover is present and it is an error for one to be missing.
    pub covers_dir: Option<PathBuf>,
    /// When set, root images are bilinearly resized to this square side on
    /// ingest instead of being rejected for off-grid dimensions.
    pub pad_roots_to: Option<u32>,
}

/// List image files (png/jpg/jpeg) in a directory, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|cause| Error::Io {
        path: dir.into(),
        cause,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Synthesise an offspring cover from its parent: one geometry operation
/// followed by one photometric/detail operation at severities in
/// [0.45, 0.85], drawn from the node's own stream. Stands in for a
/// generative model; the severity floor keeps offspring perceptually
/// distinct from their parents the way regenerated content is. The
/// geometry KIND rotates through the menu by sibling ordinal (anchored at
/// a parent-derived offset), so children of one parent never share a warp
/// shape and cannot collide perceptually.
fn synthesize_cover(
    parent: &ImageBuffer,
    master_seed: u64,
    node_index: u64,
    parent_index: u64,
    sibling_ordinal: u64,
) -> Result<ImageBuffer> {
    const GEOMETRY: [ChannelOpKind; 4] = [
        ChannelOpKind::Crop,
        ChannelOpKind::Rotate,
        ChannelOpKind::PerspH,
        ChannelOpKind::PerspV,
    ];
    const PHOTOMETRIC: [ChannelOpKind; 10] = [
        ChannelOpKind::Brightness,
        ChannelOpKind::Contrast,
        ChannelOpKind::Exposure,
        ChannelOpKind::Saturation,
        ChannelOpKind::Warmth,
        ChannelOpKind::Tint,
        ChannelOpKind::Blur,
        ChannelOpKind::Sharpen,
        ChannelOpKind::Grain,
        ChannelOpKind::Jpeg,
    ];
    fn draw_op(rng: &mut SplitMix64, kind: ChannelOpKind) -> ChannelOp {
        let mut severity = 0.45 + 0.4 * rng.next_f64();
        if kind.signed() && rng.next_u64() & 1 == 1 {
            severity = -severity;
        }
        let seed = if kind == ChannelOpKind::Grain {
            rng.next_u64()
        } else {
            0
        };
        ChannelOp::with_seed(kind, severity, seed)
    }
    let mut rng = SplitMix64::new(master_seed ^ node_index);
    let base = crate::prng::mix64(master_seed ^ parent_index);
    let geometry_kind =
        GEOMETRY[(base.wrapping_add(sibling_ordinal) % GEOMETRY.len() as u64) as usize];
    let first = draw_op(&mut rng, geometry_kind);
    let photometric_kind = PHOTOMETRIC[rng.next_below(PHOTOMETRIC.len() as u64) as usize];
    let second = draw_op(&mut rng, photometric_kind);
    apply(&apply(parent, &first)?, &second)
}

/// Build a phylogenetic tree under `out_dir` and return its manifest
/// (which is also written there as `manifest.json`).
pub fn build_tree(config: &TreeBuildConfig) -> Result<TreeManifest> {
    let root_files = list_images(&config.roots_dir)?;
    if root_files.is_empty() {
        return Err(Error::InvalidParam(format!(
            "no images in {}",
            config.roots_dir.display()
        )));
    }
    if config.branching.contains(&0) {
        return Err(Error::InvalidParam("branching factors must be >= 1".into()));
    }
    fs::create_dir_all(&config.out_dir).map_err(|cause| Error::Io {
        path: config.out_dir.clone(),
        cause,
    })?;

    let tree_key = SplitMix64::new(config.master_seed).next_u64();
    let key_hex = format!("{tree_key:016x}");
    let spec = config.projector.spec().clone();

    // Roots are generation 0; ids are assigned breadth-first so the scheme
    // is predictable for externally supplied covers.
    let mut nodes: Vec<PhyloNode> = Vec::new();
    let mut images: Vec<ImageBuffer> = Vec::new(); // current generation
    let mut next_index = 0u64;

    let loaded = exec::map_slice(&root_files, |path| match config.pad_roots_to {
        Some(side) => crate::imaging::load_image_resized(path, side),
        None => load_image(path),
    });
    for (file, img) in root_files.iter().zip(loaded) {
        let img = img.map_err(|e| Error::InvalidParam(format!("root {}: {e}", file.display())))?;
        let id = format!("n{next_index:04}");
        next_index += 1;
        let rel = format!("{id}.png");
        save_image(&img, &config.out_dir.join(&rel), SaveFormat::Png)?;
        nodes.push(PhyloNode {
            id,
            path: rel,
            parent_id: None,
            generation: 0,
            key_seed: key_hex.clone(),
            projector: spec.clone(),
            trait_embedded: None,
        });
        images.push(img);
    }

    let mut parent_range = 0..nodes.len();
    let mut parent_images = images;
    for (gen_idx, &fanout) in config.branching.iter().enumerate() {
        let generation = gen_idx as u32 + 1;
        struct Task {
            parent_slot: usize,
            parent_index: u64,
            sibling_ordinal: u64,
            node_index: u64,
            id: String,
        }
        let mut tasks = Vec::new();
        for slot in 0..parent_range.len() {
            for ordinal in 0..fanout {
                tasks.push(Task {
                    parent_slot: slot,
                    parent_index: (parent_range.start + slot) as u64,
                    sibling_ordinal: ordinal as u64,
                    node_index: next_index,
                    id: format!("n{next_index:04}"),
                });
                next_index += 1;
            }
        }
        let parent_nodes = &nodes[parent_range.clone()];
        let results = exec::map_slice(&tasks, |task| -> Result<(ImageBuffer, PhyloNode)> {
            let parent_img = &parent_images[task.parent_slot];
            let parent_node = &parent_nodes[task.parent_slot];
            let cover = match &config.covers_dir {
                Some(dir) => {
                    let path = dir.join(format!("{}.png", task.id));
                    load_image(&path)?
                }
                None => synthesize_cover(
                    parent_img,
                    config.master_seed,
                    task.node_index,
                    task.parent_index,
                    task.sibling_ordinal,
                )?,
            };
            let parent_path = config.out_dir.join(&parent_node.path);
            let outcome = inherit(
                parent_img,
                Some(parent_path.as_path()),
                &cover,
                &config.projector,
                &config.stego,
                tree_key,
            )?;
            let rel = format!("{}.png", task.id);
            save_image(&outcome.stego, &config.out_dir.join(&rel), SaveFormat::Png)?;
            let node = PhyloNode {
                id: task.id.clone(),
                path: rel,
                parent_id: Some(parent_node.id.clone()),
                generation,
                key_seed: key_hex.clone(),
                projector: spec.clone(),
                trait_embedded: Some(outcome.trait_embedded.to_hex()?),
            };
            Ok((outcome.stego, node))
        });
        let mut child_images = Vec::with_capacity(tasks.len());
        let start = nodes.len();
        for result in results {
            let (img, node) = result?;
            child_images.push(img);
            nodes.push(node);
        }
        parent_range = start..nodes.len();
        parent_images = child_images;
    }

    let manifest = TreeManifest {
        nodes,
        branching: config.branching.clone(),
        stego: config.stego,
        created: creation_stamp(),
    };
    manifest.validate()?;
    manifest.save(&config.out_dir.join("manifest.json"))?;
    Ok(manifest)
}

/// A candidate parent to score against a query.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub id: String,
    pub path: PathBuf,
}

#[derive(Clone, Copy, Debug)]
pub struct MatchConfig {
    pub threshold: f64,
    pub top_k: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            threshold: 0.75,
            top_k: 5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankedMatch {
    pub id: String,
    pub similarity: f64,
}

/// Retrieval outcome: the nominated candidate (or null for abstention)
/// plus the ranked shortlist and any skipped candidates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatchResult {
    pub nominated: Option<String>,
    pub similarity: f64,
    pub threshold: f64,
    /// Hex of the trait extracted from the query.
    pub extracted: String,
    pub ranked: Vec<RankedMatch>,
    /// Other candidate ids sharing the best similarity (tie broken towards
    /// the lexicographically smallest id).
    pub ties: Vec<String>,
    /// Candidates skipped because their image could not be read.
    pub skipped: Vec<String>,
}

/// Score a query against an explicit candidate list.
pub fn match_against(
    query: &ImageBuffer,
    candidates: &[Candidate],
    projector: &Projector,
    stego: &StegoSystem,
    key_seed: u64,
    cfg: &MatchConfig,
) -> Result<MatchResult> {
    if candidates.is_empty() {
        return Err(Error::EmptyPool);
    }
    let extracted = stego.extract_with_seed(query, key_seed, projector.spec().bits())?;
    let scores = exec::map_slice(candidates, |cand| -> Result<f64> {
        let img = load_image(&cand.path)?;
        let t = projector.project(&img, Some(&cand.path))?;
        agreement(&extracted, &t)
    });

    let mut scored: Vec<(&str, f64)> = Vec::with_capacity(candidates.len());
    let mut skipped = Vec::new();
    for (cand, score) in candidates.iter().zip(scores) {
        match score {
            Ok(s) => scored.push((cand.id.as_str(), s)),
            Err(_) => skipped.push(cand.id.clone()),
        }
    }
    let mut result = MatchResult {
        nominated: None,
        similarity: 0.0,
        threshold: cfg.threshold,
        extracted: extracted.to_hex().unwrap_or_default(),
        ranked: Vec::new(),
        ties: Vec::new(),
        skipped,
    };
    if scored.is_empty() {
        return Ok(result);
    }
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("agreement rates are finite")
            .then_with(|| a.0.cmp(b.0))
    });
    let (best_id, best_sim) = scored[0];
    result.similarity = best_sim;
    result.ties = scored[1..]
        .iter()
        .take_while(|(_, s)| *s == best_sim)
        .map(|(id, _)| id.to_string())
        .collect();
    result.ranked = scored
        .iter()
        .take(cfg.top_k)
        .map(|(id, s)| RankedMatch {
            id: id.to_string(),
            similarity: *s,
        })
        .collect();
    if best_sim >= cfg.threshold {
        result.nominated = Some(best_id.to_string());
    }
    Ok(result)
}

/// Score a query against every node of a pool.
pub fn match_query(
    query: &ImageBuffer,
    pool: &Pool,
    projector: &Projector,
    stego: &StegoSystem,
    key_seed: u64,
    cfg: &MatchConfig,
) -> Result<MatchResult> {
    match_against(query, &pool.candidates(), projector, stego, key_seed, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projector::FeatureSource;
    use crate::stego::QimParams;
    use crate::synthetic;

    fn sha_projector() -> Projector {
        Projector::new(ProjectorSpec::Sha256 { n: 64 }, None).unwrap()
    }

    #[test]
    fn rfc3339_known_values() {
        assert_eq!(rfc3339_utc(0), "1970-01-01T00:00:00Z");
        assert_eq!(rfc3339_utc(86_399), "1970-01-01T23:59:59Z");
        assert_eq!(rfc3339_utc(1_000_000_000), "2001-09-09T01:46:40Z");
    }

    #[test]
    fn inherit_round_trip_composition() {
        let parent = synthetic::generate(100, 64, 64);
        let stego = StegoSystem::Qim(QimParams::default());
        let projector = sha_projector();
        // Self-derivation: the cover is the parent itself.
        let out = inherit(&parent, None, &parent, &projector, &stego, 7).unwrap();
        let read = stego.extract_with_seed(&out.stego, 7, 64).unwrap();
        assert_eq!(read, out.trait_embedded);
        assert_eq!(read, projector.project(&parent, None).unwrap());
    }

    #[test]
    fn inherit_is_independent_of_resemblance() {
        // A cover visually unrelated to the parent still carries the
        // parent's trait exactly.
        let parent = synthetic::generate(101, 64, 64);
        let cover = synthetic::generate(999, 64, 64);
        let stego = StegoSystem::Qim(QimParams::default());
        let projector = sha_projector();
        let out = inherit(&parent, None, &cover, &projector, &stego, 8).unwrap();
        let read = stego.extract_with_seed(&out.stego, 8, 64).unwrap();
        assert_eq!(read, projector.project(&parent, None).unwrap());
    }

    #[test]
    fn different_parents_same_cover_differ() {
        let p1 = synthetic::generate(102, 64, 64);
        let p2 = synthetic::generate(103, 64, 64);
        let cover = synthetic::generate(104, 64, 64);
        let stego = StegoSystem::Qim(QimParams::default());
        let projector = sha_projector();
        let a = inherit(&p1, None, &cover, &projector, &stego, 9).unwrap();
        let b = inherit(&p2, None, &cover, &projector, &stego, 9).unwrap();
        assert_ne!(a.trait_embedded, b.trait_embedded);
        assert_ne!(a.stego, b.stego);
    }

    fn desk_tree(dir: &Path, roots: usize, branching: &[u32], seed: u64) -> TreeManifest {
        let roots_dir = dir.join("roots");
        fs::create_dir_all(&roots_dir).unwrap();
        for i in 0..roots {
            let img = synthetic::generate(2000 + i as u64, 64, 64);
            save_image(
                &img,
                &roots_dir.join(format!("r{i:02}.png")),
                SaveFormat::Png,
            )
            .unwrap();
        }
        build_tree(&TreeBuildConfig {
            roots_dir,
            branching: branching.to_vec(),
            projector: sha_projector(),
            stego: StegoSystem::Qim(QimParams::default()),
            master_seed: seed,
            out_dir: dir.join("tree"),
            covers_dir: None,
            pad_roots_to: None,
        })
        .unwrap()
    }

    #[test]
    fn tree_node_counts() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = desk_tree(dir.path(), 2, &[3, 2, 1], 5);
        assert_eq!(manifest.nodes.len(), 2 * (1 + 3 + 6 + 6));
        manifest.validate().unwrap();

        let dir = tempfile::tempdir().unwrap();
        let manifest = desk_tree(dir.path(), 1, &[1], 6);
        assert_eq!(manifest.nodes.len(), 2);
    }

    #[test]
    fn tree_is_deterministic() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let m1 = desk_tree(d1.path(), 2, &[2, 1], 7);
        let m2 = desk_tree(d2.path(), 2, &[2, 1], 7);
        assert_eq!(m1, m2);
        for node in &m1.nodes {
            let a = fs::read(d1.path().join("tree").join(&node.path)).unwrap();
            let b = fs::read(d2.path().join("tree").join(&node.path)).unwrap();
            assert_eq!(a, b, "node {} differs", node.id);
        }
        let ja = fs::read(d1.path().join("tree/manifest.json")).unwrap();
        let jb = fs::read(d2.path().join("tree/manifest.json")).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn match_finds_parent_and_abstains() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = desk_tree(dir.path(), 2, &[2, 1], 11);
        let pool = Pool {
            manifest: manifest.clone(),
            dir: dir.path().join("tree"),
        };
        let projector = sha_projector();
        let stego = manifest.stego;
        let key = manifest.key_seed().unwrap();
        let cfg = MatchConfig::default();

        // Every non-root query nominates its true parent on a clean pool.
        for node in manifest.nodes.iter().filter(|n| n.parent_id.is_some()) {
            let query = load_image(&pool.node_path(node)).unwrap();
            let result = match_query(&query, &pool, &projector, &stego, key, &cfg).unwrap();
            assert_eq!(result.nominated, node.parent_id, "query {}", node.id);
            assert_eq!(result.similarity, 1.0);
        }

        // Remove a query's parent: the match must abstain.
        let child = manifest
            .nodes
            .iter()
            .find(|n| n.generation == 1)
            .unwrap()
            .clone();
        let query = load_image(&pool.node_path(&child)).unwrap();
        let without_parent: Vec<Candidate> = pool
            .candidates()
            .into_iter()
            .filter(|c| Some(&c.id) != child.parent_id.as_ref())
            .collect();
        let result = match_against(&query, &without_parent, &projector, &stego, key, &cfg).unwrap();
        assert_eq!(result.nominated, None);
        assert!(result.similarity < cfg.threshold);
    }

    #[test]
    fn match_empty_pool_errors() {
        let query = synthetic::generate(1, 64, 64);
        let projector = sha_projector();
        let stego = StegoSystem::Qim(QimParams::default());
        assert!(matches!(
            match_against(&query, &[], &projector, &stego, 1, &MatchConfig::default()),
            Err(Error::EmptyPool)
        ));
    }

    #[test]
    fn match_tie_breaks_to_smallest_id() {
        let dir = tempfile::tempdir().unwrap();
        let img = synthetic::generate(500, 64, 64);
        // The same image under two ids produces an exact tie.
        for name in ["b.png", "a.png"] {
            save_image(&img, &dir.path().join(name), SaveFormat::Png).unwrap();
        }
        let projector = sha_projector();
        let stego = StegoSystem::Qim(QimParams::default());
        let key = 42;
        let t = projector.project(&img, None).unwrap();
        let keymat = stego.derive(key, 64, 64, 64).unwrap();
        let query = stego.embed(&img, &t, &keymat).unwrap();
        let candidates = vec![
            Candidate {
                id: "b".into(),
                path: dir.path().join("b.png"),
            },
            Candidate {
                id: "a".into(),
                path: dir.path().join("a.png"),
            },
        ];
        let result = match_against(
            &query,
            &candidates,
            &projector,
            &stego,
            key,
            &MatchConfig::default(),
        )
        .unwrap();
        assert_eq!(result.nominated.as_deref(), Some("a"));
        assert_eq!(result.ties, vec!["b".to_string()]);
    }

    #[test]
    fn unreadable_candidate_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let img = synthetic::generate(501, 64, 64);
        save_image(&img, &dir.path().join("ok.png"), SaveFormat::Png).unwrap();
        let projector = sha_projector();
        let stego = StegoSystem::Qim(QimParams::default());
        let candidates = vec![
            Candidate {
                id: "gone".into(),
                path: dir.path().join("missing.png"),
            },
            Candidate {
                id: "ok".into(),
                path: dir.path().join("ok.png"),
            },
        ];
        let result = match_against(
            &img,
            &candidates,
            &projector,
            &stego,
            3,
            &MatchConfig::default(),
        )
        .unwrap();
        assert_eq!(result.skipped, vec!["gone".to_string()]);
        assert_eq!(result.ranked.len(), 1);
    }

    #[test]
    fn cellmeans_projector_round_trip_in_tree() {
        let dir = tempfile::tempdir().unwrap();
        let roots_dir = dir.path().join("roots");
        fs::create_dir_all(&roots_dir).unwrap();
        for i in 0..2 {
            let img = synthetic::generate(3000 + i, 64, 64);
            save_image(&img, &roots_dir.join(format!("r{i}.png")), SaveFormat::Png).unwrap();
        }
        let projector = Projector::new(
            ProjectorSpec::Randproj { n: 64, seed: 5 },
            Some(FeatureSource::CellMeans { grid: 16 }),
        )
        .unwrap();
        let manifest = build_tree(&TreeBuildConfig {
            roots_dir,
            branching: vec![2],
            projector: projector.clone(),
            stego: StegoSystem::Qim(QimParams::default()),
            master_seed: 99,
            out_dir: dir.path().join("tree"),
            covers_dir: None,
            pad_roots_to: None,
        })
        .unwrap();
        let pool = Pool {
            manifest: manifest.clone(),
            dir: dir.path().join("tree"),
        };
        let key = manifest.key_seed().unwrap();
        for node in manifest.nodes.iter().filter(|n| n.parent_id.is_some()) {
            let query = load_image(&pool.node_path(node)).unwrap();
            let result = match_query(
                &query,
                &pool,
                &projector,
                &manifest.stego,
                key,
                &MatchConfig::default(),
            )
            .unwrap();
            assert_eq!(result.nominated, node.parent_id);
        }
    }
}
