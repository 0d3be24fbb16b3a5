//! Command-line entry point.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::alignment::{degradation_report, perturb, search_alignment, AlignmentObjective, AlignmentSearchSpec};
use crate::assessment::{
    assess_run, default_workers, tile_class_counts, weighted_tile_sample, AssessOptions, ConsolidationMode,
    SamplerSpec, DEFAULT_MAX_PIXEL_BYTES,
};
use crate::error::{Error, ErrorKind, Result, Warning};
use crate::evaluation::{evaluate_run, AlignmentMode, Split, SplitManifest};
use crate::footprints::{emit_footprints, parse_footprints, BuildingFootprint, DamageClass, NUM_CLASSES};
use crate::inference::{
    constant_backend, replay_oracle_backend, score_plane_path, uniform_random_backend, write_score_plane,
    ScoreDirBackend, SegmentationBackend,
};
use crate::products::{emit_csv, emit_geojson, parse_csv, Clock, FixedClock, RunReport, SystemClock};
use crate::raster::io::open_raster;
use crate::raster::{resample_to_gsd, tile_grid, validate_gsd, GeoRaster, ResampleMethod};
use crate::synthetic::{generate_scene, write_scene, SceneSpec};

#[derive(Debug, Parser)]
#[command(name = "suas-damage", version, about = "Building damage assessment from sUAS orthomosaics")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Tile edge length in pixels.
    #[arg(long, global = true, default_value_t = 2048, value_parser = clap::value_parser!(u64).range(1..))]
    tile_size: u64,
    /// Buildings with fewer mask pixels are flagged low_coverage.
    #[arg(long, global = true, default_value_t = 1)]
    min_pixels: usize,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true, env = "SUAS_ASSESS_WORKERS", value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Aligned)]
    mode: ModeArg,
    /// replay | random | constant:<class> | scoredir:<path>
    #[arg(long, global = true, default_value = "replay")]
    backend: String,
    /// Fixed run id (default: random UUID).
    #[arg(long, global = true)]
    run_id: Option<String>,
    /// Fixed RFC 3339 time for report timestamps.
    #[arg(long, global = true)]
    fixed_time: Option<String>,
    /// Prefix CSV output with a schema comment line.
    #[arg(long, global = true)]
    csv_comment: bool,
    /// Resample the raster to this GSD (meters per pixel) before tiling.
    #[arg(long, global = true)]
    gsd: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = ResampleArg::Bilinear)]
    resample: ResampleArg,
    #[arg(long, global = true, value_enum, default_value_t = ConsolidationArg::ScoreSum)]
    consolidation: ConsolidationArg,
    /// Cap on resident pixel-buffer bytes.
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_PIXEL_BYTES)]
    max_pixel_bytes: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Aligned,
    Unaligned,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ResampleArg {
    Nearest,
    Bilinear,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ConsolidationArg {
    ScoreSum,
    PixelVote,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Concentration,
    MaskCorrelation,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExportFormat {
    Geojson,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the tile manifest of a raster.
    Tile {
        #[arg(long)]
        raster: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assess every building and write GeoJSON, CSV and a run report.
    Assess {
        #[arg(long)]
        raster: PathBuf,
        #[arg(long)]
        footprints: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write per-tile score planes only.
    Infer {
        #[arg(long)]
        raster: PathBuf,
        /// Labeled footprints, needed by the replay backend.
        #[arg(long)]
        footprints: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score assessments (CSV) against labeled footprints.
    Evaluate {
        #[arg(long)]
        assessments: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, requires = "split")]
        manifest: Option<PathBuf>,
        #[arg(long, requires = "manifest")]
        split: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Translate footprints by (dx, dy) meters.
    Perturb {
        #[arg(long)]
        footprints: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        dx: f64,
        #[arg(long, allow_hyphen_values = true)]
        dy: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search the translation that registers footprints to the imagery.
    Align {
        #[arg(long)]
        raster: PathBuf,
        #[arg(long)]
        footprints: PathBuf,
        /// Footprints the replay backend paints (default: the input
        /// footprints moved back by their recorded offsets).
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        window: f64,
        #[arg(long, default_value_t = 0.1)]
        step: f64,
        #[arg(long, value_enum, default_value_t = ObjectiveArg::Concentration)]
        objective: ObjectiveArg,
        /// Include the full objective surface in the output.
        #[arg(long)]
        surface: bool,
        /// Also write footprints corrected by the recovered offset.
        #[arg(long)]
        corrected: Option<PathBuf>,
        /// Macro F1 drop at each of these offsets, `dx,dy` in meters.
        #[arg(long = "degradation", allow_hyphen_values = true)]
        degradation: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a class-balanced tile sample for training.
    Sample {
        #[arg(long)]
        raster: PathBuf,
        #[arg(long)]
        footprints: PathBuf,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        /// Five comma-separated class weights summing to 1.
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-emit CSV assessments as GeoJSON or CSV.
    Export {
        #[arg(long)]
        assessments: PathBuf,
        #[arg(long)]
        footprints: PathBuf,
        #[arg(long, value_enum)]
        format: ExportFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic labeled scene.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1024)]
        width: usize,
        #[arg(long, default_value_t = 1024)]
        height: usize,
        #[arg(long, default_value_t = 0.05)]
        scene_gsd: f64,
        #[arg(long, default_value_t = 50)]
        buildings: usize,
    },
}

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Internal => 3,
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.kind())
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_text<T: serde::Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Internal(format!("json: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn report_warnings(ws: &[Warning]) {
    for w in ws {
        eprintln!("warning[{}]: {}", w.code, w.message);
    }
}

fn load_footprints(path: &Path) -> Result<(Vec<BuildingFootprint<f64>>, Option<String>)> {
    let parsed = parse_footprints(&read_text(path)?)?;
    report_warnings(&parsed.warnings);
    Ok((parsed.footprints, parsed.crs_id))
}

impl Global {
    fn workers(&self) -> usize {
        self.workers.map_or_else(default_workers, |w| w as usize)
    }

    fn alignment_mode(&self) -> AlignmentMode {
        match self.mode {
            ModeArg::Aligned => AlignmentMode::Aligned,
            ModeArg::Unaligned => AlignmentMode::Unaligned,
        }
    }

    fn assess_options(&self) -> AssessOptions {
        AssessOptions {
            tile_size: self.tile_size as usize,
            min_pixels: self.min_pixels,
            workers: self.workers(),
            mode: match self.consolidation {
                ConsolidationArg::ScoreSum => ConsolidationMode::ScoreSum,
                ConsolidationArg::PixelVote => ConsolidationMode::PixelVote,
            },
            max_pixel_bytes: self.max_pixel_bytes,
            max_tiles_in_flight: None,
        }
    }

    fn clock(&self) -> Result<Box<dyn Clock>> {
        match &self.fixed_time {
            Some(t) => {
                let t = DateTime::parse_from_rfc3339(t)
                    .map_err(|e| Error::InvalidArgument(format!("--fixed-time `{t}`: {e}")))?;
                Ok(Box::new(FixedClock(t.with_timezone(&Utc))))
            }
            None => Ok(Box::new(SystemClock)),
        }
    }

    fn run_id(&self) -> String {
        self.run_id
            .clone()
            .unwrap_or_else(|| uuid::Uuid::new_v4().to_string())
    }

    fn open_raster(&self, path: &Path) -> Result<GeoRaster> {
        let (raster, warnings) = open_raster(path)?;
        report_warnings(&warnings);
        match self.gsd {
            Some(g) => {
                let method = match self.resample {
                    ResampleArg::Nearest => ResampleMethod::Nearest,
                    ResampleArg::Bilinear => ResampleMethod::Bilinear,
                };
                resample_to_gsd(&raster, g, method)
            }
            None => Ok(raster),
        }
    }

    /// Builds the backend named by `--backend`. The replay backend paints
    /// `replay_source`, which must carry truth labels.
    fn backend(
        &self,
        raster: &GeoRaster,
        replay_source: Option<&[BuildingFootprint<f64>]>,
    ) -> Result<Box<dyn SegmentationBackend>> {
        let spec = self.backend.as_str();
        if spec == "replay" {
            let fps = replay_source
                .ok_or_else(|| Error::InvalidArgument("the replay backend needs labeled footprints".into()))?;
            return Ok(Box::new(replay_oracle_backend(fps, raster.transform)?));
        }
        if spec == "random" {
            return Ok(Box::new(uniform_random_backend(self.seed)));
        }
        if let Some(class) = spec.strip_prefix("constant:") {
            let class: DamageClass = class
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("unknown class in --backend `{spec}`")))?;
            return Ok(Box::new(constant_backend(class)));
        }
        if let Some(dir) = spec.strip_prefix("scoredir:") {
            if dir.is_empty() {
                return Err(Error::InvalidArgument("--backend scoredir: needs a directory".into()));
            }
            return Ok(Box::new(ScoreDirBackend { dir: dir.into() }));
        }
        Err(Error::InvalidArgument(format!(
            "unknown backend `{spec}` (replay|random|constant:<class>|scoredir:<path>)"
        )))
    }

    fn config_echo(&self) -> serde_json::Value {
        json!({
            "tile_size": self.tile_size,
            "min_pixels": self.min_pixels,
            "seed": self.seed,
            "workers": self.workers(),
            "mode": self.alignment_mode().as_str(),
            "backend": self.backend,
            "consolidation": self.assess_options().mode,
            "gsd": self.gsd,
            "max_pixel_bytes": self.max_pixel_bytes,
        })
    }
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::InvalidArgument(format!("expected `dx,dy`, got `{s}`"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn parse_target(s: &str) -> Result<[f64; NUM_CLASSES]> {
    let vals = s
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::InvalidArgument(format!("--target `{s}` is not a list of numbers")))?;
    vals.try_into()
        .map_err(|_| Error::InvalidArgument(format!("--target needs {NUM_CLASSES} weights")))
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Tile { raster, out } => {
            let r = g.open_raster(raster)?;
            let grid = tile_grid(&r, g.tile_size as usize)?;
            let tiles: Vec<_> = grid
                .tiles()
                .map(|t| {
                    json!({
                        "col": t.col, "row": t.row,
                        "col_off": t.window.col_off, "row_off": t.window.row_off,
                        "width": t.window.width, "height": t.window.height,
                        "origin_x": t.transform.origin_x, "origin_y": t.transform.origin_y,
                    })
                })
                .collect();
            let manifest = json!({
                "raster_width": r.width, "raster_height": r.height,
                "tile_size": grid.tile_size, "cols": grid.cols, "rows": grid.rows,
                "gsd": r.gsd(), "crs_id": r.crs_id,
                "warnings": validate_gsd(&r),
                "tiles": tiles,
            });
            emit(out.as_deref(), &json_text(&manifest)?)
        }
        Command::Assess { raster, footprints, out_dir } => {
            let clock = g.clock()?;
            let started = clock.now();
            let run_id = g.run_id();
            let r = g.open_raster(raster)?;
            let (fps, crs) = load_footprints(footprints)?;
            let mode = g.alignment_mode();
            let working = mode.prepare(&fps);
            let truth_positions: Vec<_> = fps.iter().map(|f| f.registered()).collect();
            let backend = g.backend(&r, Some(&truth_positions))?;
            let (assessments, stats) = assess_run(&r, &working, backend.as_ref(), &g.assess_options())?;
            report_warnings(&stats.warnings);
            let crs_id = crs.unwrap_or_else(|| r.crs_id.clone());
            let geojson = emit_geojson(&assessments, &working, Some(&crs_id), &run_id)?;
            let csv = emit_csv(&assessments, g.csv_comment)?;
            let report = RunReport::new(&run_id, started, clock.now(), &stats, r.gsd(), g.config_echo());
            fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
            write_text(&out_dir.join("assessments.geojson"), &geojson)?;
            write_text(&out_dir.join("assessments.csv"), &csv)?;
            write_text(&out_dir.join("run_report.json"), &json_text(&report)?)?;
            eprintln!(
                "assessed {} buildings over {} tiles in {:.2} s ({} bytes, backend {})",
                stats.building_count, stats.tile_count, stats.wall_seconds, stats.input_bytes, stats.backend_name
            );
            Ok(())
        }
        Command::Infer { raster, footprints, out_dir } => {
            let r = g.open_raster(raster)?;
            let fps = match footprints {
                Some(p) => Some(load_footprints(p)?.0.iter().map(|f| f.registered()).collect::<Vec<_>>()),
                None => None,
            };
            let backend = g.backend(&r, fps.as_deref())?;
            let grid = tile_grid(&r, g.tile_size as usize)?;
            fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
            for t in grid.tiles() {
                let px = r.read_window(t.window)?;
                let scores = backend.infer(&t, &px)?;
                write_score_plane(&scores, &score_plane_path(out_dir, t.col, t.row))?;
            }
            eprintln!("wrote {} score planes to {}", grid.len(), out_dir.display());
            Ok(())
        }
        Command::Evaluate { assessments, truth, manifest, split, out } => {
            let preds = parse_csv(&read_text(assessments)?)?;
            let (truth, _) = load_footprints(truth)?;
            let manifest = match manifest {
                Some(p) => Some(SplitManifest::from_json(&read_text(p)?)?),
                None => None,
            };
            let split = split.as_deref().map(str::parse::<Split>).transpose()?;
            let report = evaluate_run(&preds, &truth, g.alignment_mode(), manifest.as_ref(), split)?;
            emit(out.as_deref(), &json_text(&report)?)
        }
        Command::Perturb { footprints, dx, dy, out } => {
            let (fps, crs) = load_footprints(footprints)?;
            write_text(out, &emit_footprints(&perturb(&fps, *dx, *dy), crs.as_deref()))
        }
        Command::Align {
            raster,
            footprints,
            reference,
            window,
            step,
            objective,
            surface,
            corrected,
            degradation,
            out,
        } => {
            let r = g.open_raster(raster)?;
            let (fps, crs) = load_footprints(footprints)?;
            let reference = match reference {
                Some(p) => load_footprints(p)?.0,
                None => fps.iter().map(|f| f.registered()).collect(),
            };
            let objective = match objective {
                ObjectiveArg::Concentration => AlignmentObjective::Concentration,
                ObjectiveArg::MaskCorrelation => AlignmentObjective::MaskCorrelation,
            };
            let needs_backend = objective == AlignmentObjective::Concentration || !degradation.is_empty();
            let backend = if needs_backend { Some(g.backend(&r, Some(&reference))?) } else { None };
            let spec = AlignmentSearchSpec {
                window: *window,
                step: *step,
                objective,
                tile_size: g.tile_size as usize,
                keep_surface: *surface,
            };
            let geometry_only: Vec<_> = fps
                .iter()
                .map(|f| {
                    let mut f = f.clone();
                    f.alignment_offset = None;
                    f
                })
                .collect();
            let result = search_alignment(&r, &geometry_only, &spec, backend.as_deref())?;
            let mut doc = serde_json::to_value(&result).map_err(|e| Error::Internal(e.to_string()))?;
            if !degradation.is_empty() {
                let offsets = degradation.iter().map(|s| parse_pair(s)).collect::<Result<Vec<_>>>()?;
                let backend = backend.as_deref().ok_or_else(|| Error::Internal("backend missing".into()))?;
                let rows = degradation_report(&r, &reference, backend, &offsets, &g.assess_options())?;
                doc["degradation"] = serde_json::to_value(rows).map_err(|e| Error::Internal(e.to_string()))?;
            }
            if let Some(p) = corrected {
                let (dx, dy) = result.best_offset;
                let fixed: Vec<_> = geometry_only
                    .iter()
                    .map(|f| {
                        let mut m = f.translate(dx, dy);
                        m.alignment_offset = None;
                        m
                    })
                    .collect();
                write_text(p, &emit_footprints(&fixed, crs.as_deref()))?;
            }
            emit(out.as_deref(), &json_text(&doc)?)
        }
        Command::Sample { raster, footprints, count, target, out } => {
            let r = g.open_raster(raster)?;
            let (fps, _) = load_footprints(footprints)?;
            let registered: Vec<_> = fps.iter().map(|f| f.registered()).collect();
            let grid = tile_grid(&r, g.tile_size as usize)?;
            let mut spec = SamplerSpec::uniform(tile_class_counts(&registered, &grid), *count, g.seed);
            if let Some(t) = target {
                spec.target = parse_target(t)?;
            }
            emit(out.as_deref(), &json_text(&weighted_tile_sample(&spec)?)?)
        }
        Command::Export { assessments, footprints, format, out } => {
            let preds = parse_csv(&read_text(assessments)?)?;
            let text = match format {
                ExportFormat::Csv => emit_csv(&preds, g.csv_comment)?,
                ExportFormat::Geojson => {
                    let (fps, crs) = load_footprints(footprints)?;
                    let working = g.alignment_mode().prepare(&fps);
                    emit_geojson(&preds, &working, crs.as_deref(), &g.run_id())?
                }
            };
            write_text(out, &text)
        }
        Command::Synth { out_dir, width, height, scene_gsd, buildings } => {
            let scene = generate_scene(&SceneSpec::balanced(*width, *height, *scene_gsd, *buildings, g.seed))?;
            let (rp, fp) = write_scene(&scene, out_dir)?;
            eprintln!("wrote {} and {}", rp.display(), fp.display());
            Ok(())
        }
    }
}
