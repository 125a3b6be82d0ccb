//! One binary exposing every pipeline stage for scripting.
//!
//! Machine-readable output (hex, JSON, CSV) goes to stdout or `--out`;
//! diagnostics go to stderr. Exit codes: 0 success, 1 operational error,
//! 2 usage error. Identical inputs and `--seed` always produce identical
//! bytes, whatever `--jobs` says.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use stegophylo::bench;
use stegophylo::channel::{apply as channel_apply, ChannelOp, ChannelOpKind};
use stegophylo::imaging::{
    load_image, load_image_resized, psnr_checked, save_image, ssim, SaveFormat,
};
use stegophylo::phylogeny::{build_tree, inherit, match_query, MatchConfig, Pool, TreeBuildConfig};
use stegophylo::projector::{read_features, FeatureSource, Projector, ProjectorSpec};
use stegophylo::stego::{IssParams, Midband, QimParams, StegoSystem};
use stegophylo::theory::{accuracy_curve, curve_to_csv, mc_accuracy, phylo_accuracy, TheoryParams};
use stegophylo::{synthetic, with_jobs, ImageBuffer, Trait};

const PAD_SIDE: u32 = 256;

#[derive(Parser)]
#[command(
    name = "stegophylo",
    version,
    about = "Steganographic inheritance: embed heritable traits into images and retrieve parentage"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Master seed for key material, sampling and synthesis.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Projector for trait derivation.
    #[arg(long, global = true, value_enum)]
    projector: Option<ProjectorKind>,

    /// Stegosystem for embedding/extraction.
    #[arg(long, global = true, value_enum)]
    stego: Option<StegoKind>,

    /// Trait length in bits.
    #[arg(long, global = true, default_value_t = 64)]
    bits: usize,

    /// Abstention threshold on the bit agreement rate.
    #[arg(long, global = true, default_value_t = 0.75)]
    threshold: f64,

    /// Write machine output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: one per core). Output is identical at any
    /// setting.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Bilinearly resize inputs to 256x256 before processing (inputs with
    /// off-grid dimensions are otherwise rejected).
    #[arg(long, global = true)]
    pad: bool,

    /// Feature-vector file for the randproj projector (single-image
    /// commands).
    #[arg(long, global = true)]
    features: Option<PathBuf>,

    /// Directory of <image-stem>.fvec feature files (pool commands).
    #[arg(long, global = true)]
    features_dir: Option<PathBuf>,

    /// Derive randproj features from luma cell means on an NxN grid
    /// instead of reading files.
    #[arg(long, global = true, value_name = "N")]
    cellmeans: Option<u32>,

    /// Seed of the randproj projection matrix.
    #[arg(long, global = true, default_value_t = 0)]
    proj_seed: u64,

    /// QIM quantisation step.
    #[arg(long, global = true, default_value_t = 6.0)]
    delta: f64,

    /// ISS signal amplitude.
    #[arg(long, global = true, default_value_t = 3.0)]
    alpha: f64,

    /// ISS host-rejection factor in [0, 1].
    #[arg(long, global = true, default_value_t = 1.0)]
    lambda: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ProjectorKind {
    Sha256,
    Phash,
    Randproj,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StegoKind {
    Qim,
    Iss,
}

#[derive(Subcommand)]
enum Command {
    /// Project an image (or its feature vector) to a hex trait.
    Project { image: PathBuf },
    /// Embed a hex trait into an image.
    Embed {
        #[arg(long = "trait", value_name = "HEX")]
        trait_hex: String,
        input: PathBuf,
        output: PathBuf,
    },
    /// Blindly extract a hex trait from an image.
    Extract { image: PathBuf },
    /// Project the parent's trait and embed it into a cover image.
    Inherit {
        #[arg(long)]
        parent: PathBuf,
        #[arg(long)]
        cover: PathBuf,
        output: PathBuf,
    },
    /// Phylogenetic tree construction.
    Tree {
        #[command(subcommand)]
        cmd: TreeCmd,
    },
    /// Match a query against a pool, nominating its parent or abstaining.
    #[command(name = "match")]
    MatchCmd {
        #[arg(long)]
        query: PathBuf,
        #[arg(long, value_name = "MANIFEST")]
        pool: PathBuf,
        /// Ranked list depth.
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
    /// Processing-channel operations.
    Channel {
        #[command(subcommand)]
        cmd: ChannelCmd,
    },
    /// Closed-form accuracy analysis.
    Theory {
        #[command(subcommand)]
        cmd: TheoryCmd,
    },
    /// Benchmark experiments over a pool.
    Bench {
        #[command(subcommand)]
        cmd: BenchCmd,
    },
    /// PSNR and SSIM between two images.
    Quality { reference: PathBuf, test: PathBuf },
    /// Generate a deterministic synthetic image pool.
    Synth {
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 256)]
        width: u32,
        #[arg(long, default_value_t = 256)]
        height: u32,
    },
}

#[derive(Subcommand)]
enum TreeCmd {
    /// Build a tree from root images: covers are synthesised (or ingested
    /// from --covers-dir) and each child inherits its parent's trait.
    Build {
        #[arg(long, value_name = "DIR")]
        roots: PathBuf,
        /// Children per node at each generation, e.g. 3,2,1.
        #[arg(long, default_value = "3,2,1")]
        branching: String,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
        /// Externally generated covers named <child_id>.png.
        #[arg(long, value_name = "DIR")]
        covers_dir: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ChannelCmd {
    /// Apply one operation at a severity.
    Apply {
        /// One of: brightness contrast exposure saturation warmth tint
        /// blur sharpen grain jpeg crop rotate persp_h persp_v.
        #[arg(long)]
        op: String,
        #[arg(long, allow_hyphen_values = true)]
        severity: f64,
        input: PathBuf,
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum TheoryCmd {
    /// Accuracy surface over (p, q, N) grids as CSV.
    Curve {
        #[arg(long, default_value_t = 64)]
        n: u32,
        /// Comma-separated projector agreement rates.
        #[arg(long, default_value = "0.5")]
        p: String,
        /// Comma-separated stegosystem bit accuracies.
        #[arg(long, default_value = "0.5,0.6,0.7,0.8,0.9,1.0")]
        q: String,
        /// Comma-separated pool sizes.
        #[arg(long = "N", alias = "pool", default_value = "10,100,1600")]
        pool: String,
    },
    /// Closed form against a Monte Carlo estimate; exits 1 if they
    /// disagree beyond 4 standard errors.
    Check {
        #[arg(long, default_value_t = 64)]
        n: u32,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        /// Pool size.
        #[arg(long = "N", alias = "pool")]
        pool: u64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
    },
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Stegosystem bit agreement across a severity sweep.
    Distortion {
        #[arg(long, value_name = "MANIFEST")]
        pool: PathBuf,
        #[arg(long)]
        op: String,
        #[arg(long, default_value = "0,0.25,0.5,0.75,1", allow_hyphen_values = true)]
        severities: String,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Top-1 retrieval accuracy with the whole pool edited per severity.
    Retrieval {
        #[arg(long, value_name = "MANIFEST")]
        pool: PathBuf,
        #[arg(long)]
        op: String,
        #[arg(long, default_value = "0,0.25,0.5,0.75,1", allow_hyphen_values = true)]
        severities: String,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Precision/recall as extraneous images dilute the pool.
    Inclusion {
        #[arg(long, value_name = "MANIFEST")]
        pool: PathBuf,
        #[arg(long, value_name = "DIR")]
        extraneous: PathBuf,
        #[arg(long, default_value = "1,0.5,0.2,0.1")]
        ratios: String,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Precision/recall as pool members are deleted.
    Deletion {
        #[arg(long, value_name = "MANIFEST")]
        pool: PathBuf,
        #[arg(long, default_value = "1,0.5,0.2,0.1")]
        ratios: String,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs = cli.jobs;
    match with_jobs(jobs, || run(cli)) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Project { image } => {
            let img = load(image, cli.pad)?;
            let projector = resolve_projector(&cli, true)?;
            let t = projector.project(&img, Some(image))?;
            emit(&cli.out, &format!("{}\n", t.to_hex()?))?;
        }
        Command::Embed {
            trait_hex,
            input,
            output,
        } => {
            let img = load(input, cli.pad)?;
            let t = Trait::from_hex(trait_hex)?;
            let stego = resolve_stego(&cli)?;
            let key = stego.derive(cli.seed, img.width(), img.height(), t.len())?;
            let marked = stego.embed(&img, &t, &key)?;
            save(&marked, output)?;
        }
        Command::Extract { image } => {
            let img = load(image, cli.pad)?;
            let stego = resolve_stego(&cli)?;
            let t = stego.extract_with_seed(&img, cli.seed, cli.bits)?;
            emit(&cli.out, &format!("{}\n", t.to_hex()?))?;
        }
        Command::Inherit {
            parent,
            cover,
            output,
        } => {
            let parent_img = load(parent, cli.pad)?;
            let cover_img = load(cover, cli.pad)?;
            let projector = resolve_projector(&cli, true)?;
            let stego = resolve_stego(&cli)?;
            let outcome = inherit(
                &parent_img,
                Some(parent.as_path()),
                &cover_img,
                &projector,
                &stego,
                cli.seed,
            )?;
            save(&outcome.stego, output)?;
            let record = serde_json::json!({
                "trait": outcome.trait_embedded.to_hex()?,
                "key_seed": format!("{:016x}", cli.seed),
                "projector": projector.spec(),
                "stego": stego,
            });
            emit(
                &cli.out,
                &format!("{}\n", serde_json::to_string_pretty(&record)?),
            )?;
        }
        Command::Tree { cmd } => {
            let TreeCmd::Build {
                roots,
                branching,
                out_dir,
                covers_dir,
            } = cmd;
            let projector = resolve_projector(&cli, true)?;
            let stego = resolve_stego(&cli)?;
            let branching = parse_list::<u32>(branching)?;
            let manifest = build_tree(&TreeBuildConfig {
                roots_dir: roots.clone(),
                branching,
                projector,
                stego,
                master_seed: cli.seed,
                out_dir: out_dir.clone(),
                covers_dir: covers_dir.clone(),
                pad_roots_to: cli.pad.then_some(PAD_SIDE),
            })?;
            eprintln!(
                "built {} nodes under {}",
                manifest.nodes.len(),
                out_dir.display()
            );
            emit(
                &cli.out,
                &format!("{}\n", out_dir.join("manifest.json").display()),
            )?;
        }
        Command::MatchCmd { query, pool, k } => {
            let pool = Pool::load(pool)?;
            let query_img = load(query, cli.pad)?;
            let projector = pool_projector(&cli, &pool)?;
            let stego = pool_stego(&cli, &pool);
            let key_seed = if cli.seed != 0 {
                cli.seed
            } else {
                pool.manifest.key_seed()?
            };
            let cfg = MatchConfig {
                threshold: cli.threshold,
                top_k: *k,
            };
            let result = match_query(&query_img, &pool, &projector, &stego, key_seed, &cfg)?;
            emit(
                &cli.out,
                &format!("{}\n", serde_json::to_string_pretty(&result)?),
            )?;
        }
        Command::Channel { cmd } => {
            let ChannelCmd::Apply {
                op,
                severity,
                input,
                output,
            } = cmd;
            let kind = ChannelOpKind::from_id(op)?;
            let img = load(input, cli.pad)?;
            let edited = channel_apply(&img, &ChannelOp::with_seed(kind, *severity, cli.seed))?;
            save(&edited, output)?;
        }
        Command::Theory { cmd } => match cmd {
            TheoryCmd::Curve { n, p, q, pool } => {
                let rows = accuracy_curve(
                    *n,
                    &parse_list::<f64>(p)?,
                    &parse_list::<f64>(q)?,
                    &parse_list::<u64>(pool)?,
                )?;
                emit(&cli.out, &curve_to_csv(&rows))?;
            }
            TheoryCmd::Check {
                n,
                p,
                q,
                pool,
                trials,
            } => {
                let tp = TheoryParams {
                    n: *n,
                    p: *p,
                    q: *q,
                    pool: *pool,
                };
                let closed = phylo_accuracy(&tp)?;
                let (estimate, std_error) = mc_accuracy(&tp, *trials, cli.seed)?;
                let within = (closed - estimate).abs() <= 4.0 * std_error;
                let report = serde_json::json!({
                    "n": tp.n, "p": tp.p, "q": tp.q, "N": tp.pool,
                    "trials": trials,
                    "closed_form": closed,
                    "mc_estimate": estimate,
                    "std_error": std_error,
                    "within_4_se": within,
                });
                emit(
                    &cli.out,
                    &format!("{}\n", serde_json::to_string_pretty(&report)?),
                )?;
                if !within {
                    eprintln!(
                        "closed form {closed} vs Monte Carlo {estimate} exceeds 4 x {std_error}"
                    );
                    return Ok(ExitCode::from(1));
                }
            }
        },
        Command::Bench { cmd } => run_bench(&cli, cmd)?,
        Command::Quality { reference, test } => {
            let a = load(reference, cli.pad)?;
            let b = load(test, cli.pad)?;
            let p = psnr_checked(&a, &b)?;
            let s = ssim(&a, &b)?;
            let report = serde_json::json!({
                "psnr": if p.is_finite() { Some(p) } else { None },
                "identical": !p.is_finite(),
                "ssim": s,
            });
            emit(
                &cli.out,
                &format!("{}\n", serde_json::to_string_pretty(&report)?),
            )?;
        }
        Command::Synth {
            out_dir,
            count,
            width,
            height,
        } => {
            fs::create_dir_all(out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            for i in 0..*count {
                let seed = stegophylo::prng::derive_stream(cli.seed, i as u64).next_u64();
                let img = synthetic::generate(seed, *width, *height);
                let path = out_dir.join(format!("synth_{i:04}.png"));
                save(&img, &path)?;
            }
            eprintln!("wrote {count} images to {}", out_dir.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run_bench(cli: &Cli, cmd: &BenchCmd) -> Result<()> {
    match cmd {
        BenchCmd::Distortion {
            pool,
            op,
            severities,
            summary,
        } => {
            let loaded = Pool::load(pool)?;
            let kind = ChannelOpKind::from_id(op)?;
            let severities = parse_list::<f64>(severities)?;
            let stego = pool_stego(cli, &loaded);
            let key_seed = loaded.manifest.key_seed()?;
            let rows = bench::estimate_stego_agreement(
                &loaded,
                kind,
                &severities,
                &stego,
                key_seed,
                cli.seed,
            )?;
            let mut report = bench::BenchReport::new(bench::manifest_hash(pool)?, cli.seed);
            let samples = loaded
                .manifest
                .nodes
                .iter()
                .filter(|n| n.parent_id.is_some())
                .count() as u64;
            for (severity, value) in rows {
                report.rows.push(bench::BenchRow {
                    experiment: "stego_agreement".into(),
                    op: kind.id().into(),
                    severity,
                    projector: loaded.manifest.nodes[0].projector.kind_name().into(),
                    stego: stego.method_name().into(),
                    metric: "bit_agreement".into(),
                    value,
                    samples,
                });
            }
            emit(&cli.out, &report.to_csv())?;
            write_summary(summary, cli, pool, &report)?;
        }
        BenchCmd::Retrieval {
            pool,
            op,
            severities,
            summary,
        } => {
            let loaded = Pool::load(pool)?;
            let kind = ChannelOpKind::from_id(op)?;
            let severities = parse_list::<f64>(severities)?;
            let projector = pool_projector(cli, &loaded)?;
            let stego = pool_stego(cli, &loaded);
            let key_seed = loaded.manifest.key_seed()?;
            let rows = bench::run_distortion_retrieval(
                &loaded,
                kind,
                &severities,
                &projector,
                &stego,
                key_seed,
                cli.seed,
            )?;
            let mut report = bench::BenchReport::new(bench::manifest_hash(pool)?, cli.seed);
            let samples = loaded
                .manifest
                .nodes
                .iter()
                .filter(|n| n.parent_id.is_some())
                .count() as u64;
            for (severity, value) in rows {
                report.rows.push(bench::BenchRow {
                    experiment: "retrieval".into(),
                    op: kind.id().into(),
                    severity,
                    projector: projector.spec().kind_name().into(),
                    stego: stego.method_name().into(),
                    metric: "top1_accuracy".into(),
                    value,
                    samples,
                });
            }
            emit(&cli.out, &report.to_csv())?;
            write_summary(summary, cli, pool, &report)?;
        }
        BenchCmd::Inclusion {
            pool,
            extraneous,
            ratios,
            summary,
        } => {
            let loaded = Pool::load(pool)?;
            let ratios = parse_list::<f64>(ratios)?;
            let projector = pool_projector(cli, &loaded)?;
            let stego = pool_stego(cli, &loaded);
            let key_seed = loaded.manifest.key_seed()?;
            let points = bench::run_inclusion(
                &loaded,
                extraneous,
                &ratios,
                cli.threshold,
                &projector,
                &stego,
                key_seed,
                cli.seed,
            )?;
            emit(&cli.out, &bench::pr_to_csv("inclusion", &points))?;
            write_pr_summary(summary, cli, pool, "inclusion", &points)?;
        }
        BenchCmd::Deletion {
            pool,
            ratios,
            summary,
        } => {
            let loaded = Pool::load(pool)?;
            let ratios = parse_list::<f64>(ratios)?;
            let projector = pool_projector(cli, &loaded)?;
            let stego = pool_stego(cli, &loaded);
            let key_seed = loaded.manifest.key_seed()?;
            let points = bench::run_deletion(
                &loaded,
                &ratios,
                cli.threshold,
                &projector,
                &stego,
                key_seed,
                cli.seed,
            )?;
            emit(&cli.out, &bench::pr_to_csv("deletion", &points))?;
            write_pr_summary(summary, cli, pool, "deletion", &points)?;
        }
    }
    Ok(())
}

fn load(path: &Path, pad: bool) -> Result<ImageBuffer> {
    let img = if pad {
        load_image_resized(path, PAD_SIDE)?
    } else {
        load_image(path)?
    };
    Ok(img)
}

fn save(img: &ImageBuffer, path: &Path) -> Result<()> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("jpg") || ext.eq_ignore_ascii_case("jpeg") => {
            SaveFormat::Jpeg { quality: 95 }
        }
        _ => SaveFormat::Png,
    };
    save_image(img, path, format)?;
    Ok(())
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, content).with_context(|| format!("writing {}", path.display()))?
        }
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
        }
    }
    Ok(())
}

/// Feature lookup for randproj: an explicit file beats cell means beats a
/// directory (or sibling) search.
fn feature_source(cli: &Cli) -> Result<FeatureSource> {
    if let Some(file) = &cli.features {
        return Ok(FeatureSource::Fixed {
            values: read_features(file)?,
        });
    }
    if let Some(grid) = cli.cellmeans {
        return Ok(FeatureSource::CellMeans { grid });
    }
    Ok(FeatureSource::Files {
        dir: cli.features_dir.clone(),
    })
}

fn resolve_projector(cli: &Cli, required: bool) -> Result<Projector> {
    let Some(kind) = cli.projector else {
        if required {
            bail!("--projector is required for this command");
        }
        bail!("no projector selected");
    };
    let spec = match kind {
        ProjectorKind::Sha256 => ProjectorSpec::Sha256 { n: cli.bits },
        ProjectorKind::Phash => ProjectorSpec::Phash,
        ProjectorKind::Randproj => ProjectorSpec::Randproj {
            n: cli.bits,
            seed: cli.proj_seed,
        },
    };
    let features = match &spec {
        ProjectorSpec::Randproj { .. } => Some(feature_source(cli)?),
        _ => None,
    };
    Ok(Projector::new(spec, features)?)
}

/// Projector for pool commands: the manifest's recorded spec unless
/// overridden on the command line.
fn pool_projector(cli: &Cli, pool: &Pool) -> Result<Projector> {
    if cli.projector.is_some() {
        return resolve_projector(cli, true);
    }
    let spec = pool
        .manifest
        .nodes
        .first()
        .ok_or_else(|| anyhow!("pool manifest has no nodes"))?
        .projector
        .clone();
    let features = match &spec {
        ProjectorSpec::Randproj { .. } => Some(feature_source(cli)?),
        _ => None,
    };
    Ok(Projector::new(spec, features)?)
}

/// Stegosystem for pool commands: manifest's unless overridden.
fn pool_stego(cli: &Cli, pool: &Pool) -> StegoSystem {
    match cli.stego {
        Some(_) => resolve_stego(cli).expect("kind present"),
        None => pool.manifest.stego,
    }
}

fn resolve_stego(cli: &Cli) -> Result<StegoSystem> {
    let Some(kind) = cli.stego else {
        bail!("--stego is required for this command");
    };
    Ok(match kind {
        StegoKind::Qim => StegoSystem::Qim(QimParams {
            delta: cli.delta,
            midband: Midband::default(),
        }),
        StegoKind::Iss => StegoSystem::Iss(IssParams {
            alpha: cli.alpha,
            lambda: cli.lambda,
            midband: Midband::default(),
        }),
    })
}

fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|e| anyhow!("cannot parse {s:?}: {e}"))
        })
        .collect()
}

fn write_summary(
    summary: &Option<PathBuf>,
    cli: &Cli,
    manifest_path: &Path,
    report: &bench::BenchReport,
) -> Result<()> {
    let Some(path) = summary else { return Ok(()) };
    let doc = serde_json::json!({
        "manifest": manifest_path.display().to_string(),
        "manifest_sha256": report.meta.manifest_sha256,
        "seed": cli.seed,
        "threshold": cli.threshold,
        "rows": report.rows,
    });
    fs::write(path, format!("{}\n", serde_json::to_string_pretty(&doc)?))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_pr_summary(
    summary: &Option<PathBuf>,
    cli: &Cli,
    manifest_path: &Path,
    experiment: &str,
    points: &[bench::PRPoint],
) -> Result<()> {
    let Some(path) = summary else { return Ok(()) };
    let doc = serde_json::json!({
        "experiment": experiment,
        "manifest": manifest_path.display().to_string(),
        "manifest_sha256": bench::manifest_hash(manifest_path)?,
        "seed": cli.seed,
        "threshold": cli.threshold,
        "points": points,
    });
    fs::write(path, format!("{}\n", serde_json::to_string_pretty(&doc)?))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
