//! `geonet`: depth/normal refinement tools over PFM, PNG/PGM, PLY and JSON files.

mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use geonet::{
    depth_metrics, depth_to_normals, normal_metrics, normals_to_depth, three_dgm, unproject,
    GeoConfig, Refiner, SceneSpec,
};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "geonet", version, about = "Geometric depth and surface normal refinement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Least-squares surface normals from a depth map.
    Depth2normal {
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        intrinsics: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Depth refined by kernel regression over neighboring tangent planes.
    Normal2depth {
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        normals: PathBuf,
        #[arg(long)]
        intrinsics: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Joint iterative refinement of depth and normals guided by an image.
    Refine {
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        normals: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        intrinsics: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Single-channel PFM of height 4·H holding the L→R, R→L, T→B and
        /// B→T residual planes stacked top to bottom.
        #[arg(long)]
        residual_weights: Option<PathBuf>,
        #[arg(long)]
        out_depth: PathBuf,
        #[arg(long)]
        out_normals: PathBuf,
    },
    /// Depth, normal and 3D geometric metrics as JSON.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, requires = "normals_gt")]
        normals_pred: Option<PathBuf>,
        #[arg(long, requires = "normals_pred")]
        normals_gt: Option<PathBuf>,
        #[arg(long)]
        intrinsics: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "3dgm")]
        three_dgm: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Unprojects a depth map to an ASCII PLY point cloud.
    Cast {
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        intrinsics: PathBuf,
        #[arg(long)]
        color: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Renders a synthetic scene with analytic ground truth.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        /// Observed depth, including the spec's noise.
        #[arg(long)]
        out_depth: PathBuf,
        #[arg(long)]
        out_normals: PathBuf,
        /// Shaded grayscale image (format from the extension, e.g. .pgm or .png).
        #[arg(long)]
        out_image: Option<PathBuf>,
        /// Noise-free depth.
        #[arg(long)]
        out_gt_depth: Option<PathBuf>,
    },
}

fn sidecar(out: &Path, record: &Value) -> Result<()> {
    io::write_json(&io::sidecar(out), record)
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Depth2normal {
            depth,
            intrinsics,
            config,
            out,
        } => {
            let cfg = io::read_config(config.as_deref())?;
            let intr = io::read_intrinsics(&intrinsics)?;
            let d = io::read_depth(&depth)?;
            let n = depth_to_normals(&d, &intr, &cfg)?;
            io::write_normals(&out, &n)?;
            sidecar(
                &out,
                &json!({
                    "command": "depth2normal",
                    "config": cfg,
                    "intrinsics": intr,
                    "valid_pixels": n.valid_count(),
                }),
            )
        }
        Command::Normal2depth {
            depth,
            normals,
            intrinsics,
            config,
            out,
        } => {
            let cfg = io::read_config(config.as_deref())?;
            let intr = io::read_intrinsics(&intrinsics)?;
            let d = io::read_depth(&depth)?;
            let n = io::read_normals(&normals)?;
            let z = normals_to_depth(&d, &n, &intr, &cfg)?;
            io::write_depth(&out, &z)?;
            sidecar(
                &out,
                &json!({
                    "command": "normal2depth",
                    "config": cfg,
                    "intrinsics": intr,
                    "valid_pixels": z.valid_count(),
                }),
            )
        }
        Command::Refine {
            depth,
            normals,
            image,
            intrinsics,
            config,
            residual_weights,
            out_depth,
            out_normals,
        } => {
            let cfg = io::read_config(config.as_deref())?;
            let intr = io::read_intrinsics(&intrinsics)?;
            let d = io::read_depth(&depth)?;
            let n = io::read_normals(&normals)?;
            let img = io::read_gray(&image, d.dims())?;
            let (w, h) = d.dims();
            let residual = residual_weights
                .as_deref()
                .map(|p| io::read_residual(p, w, h))
                .transpose()?;
            let refiner = Refiner::new(&img, intr, cfg, residual.as_deref())?;
            let (d_out, n_out) = refiner.iterate(&d, &n)?;
            io::write_depth(&out_depth, &d_out)?;
            io::write_normals(&out_normals, &n_out)?;
            let (low, high) = geonet::pipeline::canny_thresholds(&img, &cfg);
            let record = json!({
                "command": "refine",
                "config": cfg,
                "intrinsics": intr,
                "canny_thresholds": [low, high],
                "residual_weights": residual.is_some(),
            });
            sidecar(&out_depth, &record)?;
            sidecar(&out_normals, &record)
        }
        Command::Eval {
            pred,
            gt,
            normals_pred,
            normals_gt,
            intrinsics,
            config,
            three_dgm: with_3dgm,
            out,
        } => {
            let cfg = io::read_config(config.as_deref())?;
            let intr = io::read_intrinsics(&intrinsics)?;
            let p = io::read_depth(&pred)?;
            let g = io::read_depth(&gt)?;
            let mut report = json!({
                "depth": depth_metrics(&p, &g).context("depth metrics")?,
                "config": cfg,
                "intrinsics": intr,
            });
            if let (Some(np), Some(ng)) = (normals_pred, normals_gt) {
                let m = normal_metrics(&io::read_normals(&np)?, &io::read_normals(&ng)?)
                    .context("normal metrics")?;
                report["normals"] = json!(m);
            }
            if with_3dgm {
                let m = three_dgm(&p, &g, &intr, &cfg, cfg.tv_strength, cfg.tv_iters)
                    .context("3D geometric metric")?;
                report["three_dgm"] = json!(m);
            }
            io::write_json(&out, &report)
        }
        Command::Cast {
            depth,
            intrinsics,
            color,
            out,
        } => {
            let intr = io::read_intrinsics(&intrinsics)?;
            let d = io::read_depth(&depth)?;
            let colors = color.as_deref().map(|p| io::read_rgb(p, d.dims())).transpose()?;
            let cloud = unproject(&d, &intr)?;
            io::write_ply(&out, &cloud, colors.as_deref())?;
            sidecar(
                &out,
                &json!({
                    "command": "cast",
                    "intrinsics": intr,
                    "vertices": cloud.valid_count(),
                    "colored": colors.is_some(),
                }),
            )
        }
        Command::Synth {
            spec,
            out_depth,
            out_normals,
            out_image,
            out_gt_depth,
        } => {
            let spec: SceneSpec = io::read_json(&spec, "scene spec")?;
            let scene = geonet::generate(&spec)?;
            let observed = scene.observed_depth(&spec)?;
            io::write_depth(&out_depth, &observed)?;
            io::write_normals(&out_normals, &scene.normals)?;
            if let Some(p) = &out_gt_depth {
                io::write_depth(p, &scene.depth)?;
            }
            if let Some(p) = &out_image {
                io::write_gray(p, &geonet::render_shading(&scene.depth, &scene.normals)?)?;
            }
            sidecar(
                &out_depth,
                &json!({
                    "command": "synth",
                    "spec": spec,
                    "defaults": GeoConfig::default(),
                }),
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("geonet: {e:#}");
            ExitCode::FAILURE
        }
    }
}
