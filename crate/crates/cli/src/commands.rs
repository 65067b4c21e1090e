use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rayon::prelude::*;
use serde::Serialize;

use courtcal::calibrate::{mix_seed, DetectionJson, FrameTrace, HomographyMatrix, Pipeline};
use courtcal::config::PipelineConfig;
use courtcal::court_model::standard_template;
use courtcal::eval::{evaluate, generate_scene_with, GenConfig, GroundTruth};
use courtcal::filtering::CourtColor;
use courtcal::line_detect::{LineSet, PolarLine};
use courtcal::preprocess::command::{CommandNetDetector, CommandShadowDetector, CommandShadowRemover};
use courtcal::preprocess::{Adapters, FrameInput, NetBBox, NetLine, ShadowAdapters};
use courtcal::scoring::{rasterize_court, sample_frame_indices, select_best};

use crate::source::{frame_id, load_frame, FrameSource};
use crate::{CliError, Outcome};

/// Command adapters built from the configuration; borrowed by [`Adapters`].
struct OwnedAdapters {
    shadow_mask: Option<CommandShadowDetector>,
    shadow_removal: Option<CommandShadowRemover>,
    net: Option<CommandNetDetector>,
}

impl OwnedAdapters {
    fn from_config(cfg: &PipelineConfig) -> Self {
        let a = &cfg.preprocess.adapters;
        Self {
            shadow_mask: a.shadow_mask_command.clone().map(CommandShadowDetector),
            shadow_removal: a.shadow_removal_command.clone().map(CommandShadowRemover),
            net: a.net_command.clone().map(CommandNetDetector),
        }
    }

    fn adapters(&self) -> Adapters<'_> {
        Adapters {
            shadow: ShadowAdapters {
                detector: self.shadow_mask.as_ref().map(|d| d as _),
                remover: self.shadow_removal.as_ref().map(|r| r as _),
            },
            net: self.net.as_ref().map(|n| n as _),
        }
    }
}

pub struct DetectArgs {
    pub input: PathBuf,
    pub out: PathBuf,
    pub overlay: Option<PathBuf>,
    pub overlay_color: [u8; 3],
    pub debug_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct TraceJson<'a> {
    frame_id: &'a str,
    frame_index: usize,
    shadow_source: String,
    net_bbox: Option<NetBBox>,
    net_line: Option<NetLine>,
    crop_origin: (u32, u32),
    court_color: Option<CourtColor>,
    mask_pixels: usize,
    lines: &'a LineSet<f64>,
    enumerated: usize,
    plausible: usize,
    scored: usize,
    score: Option<u64>,
    homography: Option<&'a HomographyMatrix<f64>>,
    working_homography: Option<&'a HomographyMatrix<f64>>,
    diagnostic: Option<&'a str>,
}

pub fn detect(cfg: &PipelineConfig, args: &DetectArgs) -> Result<Outcome, CliError> {
    let owned = OwnedAdapters::from_config(cfg);
    let pipeline = Pipeline::new(cfg.clone(), owned.adapters())?;
    let source = FrameSource::open(&args.input, cfg.video.decoder_command.as_deref())?;
    let indices = sample_frame_indices(source.len(), cfg.video.n_frames, cfg.seed);
    if indices.is_empty() {
        return Err(CliError::Input("no frames sampled; video.n_frames is 0".into()));
    }
    if let Some(dir) = &args.debug_dir {
        std::fs::create_dir_all(dir)?;
    }

    let traces: Vec<Result<(usize, FrameTrace), CliError>> = indices
        .par_iter()
        .map(|&i| {
            let input = source.load(i)?;
            let trace = pipeline.trace_frame(&input, i as u64)?;
            if let Some(msg) = &trace.diagnostic {
                log::info!("frame {}: {msg}", input.frame.frame_id);
            }
            if let Some(dir) = &args.debug_dir {
                write_debug(dir, i, &input, &trace)?;
            }
            Ok((i, trace))
        })
        .collect();
    let mut found = Vec::new();
    for t in traces {
        let (i, trace) = t?;
        if let Some(d) = trace.detection {
            found.push((i, d));
        }
    }
    let detections: Vec<_> = found.iter().map(|(_, d)| d.clone()).collect();
    let Some(best) = select_best(&detections) else {
        eprintln!("no plausible candidates");
        return Ok(Outcome::NoDetection);
    };

    let json = DetectionJson::new(best, pipeline.template());
    write_parent(&args.out)?;
    std::fs::write(&args.out, serde_json::to_string_pretty(&json)?)?;

    if let Some(path) = &args.overlay {
        let index = found
            .iter()
            .find(|(_, d)| d.frame_id == best.frame_id && d.candidate_index == best.candidate_index)
            .map(|(i, _)| *i)
            .expect("best comes from found");
        let input = source.load(index)?;
        let mut image = input.frame.image().clone();
        draw_court(&mut image, &best.homography, &pipeline, args.overlay_color);
        write_parent(path)?;
        image.save(path)?;
    }
    Ok(Outcome::Done)
}

fn write_parent(path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(())
}

fn draw_court(image: &mut RgbImage, h: &HomographyMatrix<f64>, pipeline: &Pipeline<'_>, color: [u8; 3]) {
    let dims = image.dimensions();
    let stroke = pipeline.config().scoring.stroke_width;
    rasterize_court(h, pipeline.template(), dims, stroke, |x, y| {
        image.put_pixel(x, y, Rgb(color));
    });
}

/// Paints `line` across the image, stepping along its longer axis.
fn draw_polar_line(image: &mut RgbImage, line: &PolarLine<f64>, color: [u8; 3]) {
    let (w, h) = image.dimensions();
    let mut put = |x: f64, y: f64| {
        let (x, y) = (x.round(), y.round());
        if x >= 0.0 && y >= 0.0 && x < w as f64 && y < h as f64 {
            image.put_pixel(x as u32, y as u32, Rgb(color));
        }
    };
    if line.theta.sin().abs() >= line.theta.cos().abs() {
        for x in 0..w {
            if let Some(y) = line.y_at(x as f64) {
                put(x as f64, y);
            }
        }
    } else {
        for y in 0..h {
            if let Some(x) = line.x_at(y as f64) {
                put(x, y as f64);
            }
        }
    }
}

fn write_debug(dir: &Path, index: usize, input: &FrameInput, trace: &FrameTrace) -> Result<(), CliError> {
    let id = &input.frame.frame_id;
    trace.shadow.frame.image().save(dir.join(format!("{id}.removed.png")))?;
    trace.working.image().save(dir.join(format!("{id}.working.png")))?;
    trace.mask.to_gray_image().save(dir.join(format!("{id}.mask.png")))?;

    let mut lines = image::DynamicImage::ImageLuma8(trace.mask.to_gray_image()).to_rgb8();
    for l in &trace.lines.horizontal {
        draw_polar_line(&mut lines, l, [0, 255, 0]);
    }
    for l in &trace.lines.vertical {
        draw_polar_line(&mut lines, l, [0, 128, 255]);
    }
    for l in &trace.lines.overflow {
        draw_polar_line(&mut lines, l, [255, 160, 0]);
    }
    lines.save(dir.join(format!("{id}.lines.png")))?;
    std::fs::write(
        dir.join(format!("{id}.lines.json")),
        serde_json::to_string_pretty(&trace.lines)?,
    )?;

    let json = TraceJson {
        frame_id: id,
        frame_index: index,
        shadow_source: format!("{:?}", trace.shadow.source),
        net_bbox: trace.net_bbox,
        net_line: trace.net_line,
        crop_origin: trace.working.crop_origin,
        court_color: trace.court_color,
        mask_pixels: trace.mask.count(),
        lines: &trace.lines,
        enumerated: trace.enumerated,
        plausible: trace.plausible,
        scored: trace.scored,
        score: trace.detection.as_ref().map(|d| d.score),
        homography: trace.detection.as_ref().map(|d| &d.homography),
        working_homography: trace.working_homography.as_ref(),
        diagnostic: trace.diagnostic.as_deref(),
    };
    std::fs::write(
        dir.join(format!("{id}.trace.json")),
        serde_json::to_string_pretty(&json)?,
    )?;
    Ok(())
}

pub struct EvalArgs {
    pub input: PathBuf,
    pub gt: PathBuf,
    pub baseline: bool,
    pub report: Option<PathBuf>,
    pub court_id: Option<String>,
}

pub fn eval(cfg: &PipelineConfig, args: &EvalArgs) -> Result<Outcome, CliError> {
    if !args.input.is_dir() {
        return Err(CliError::Input(format!("{} is not a directory", args.input.display())));
    }
    let source = FrameSource::open(&args.input, None)?;
    let frames = source
        .paths
        .par_iter()
        .map(|p| load_frame(p))
        .collect::<Result<Vec<_>, _>>()?;
    let gts = source
        .paths
        .iter()
        .map(|p| GroundTruth::load(&args.gt, &frame_id(p)))
        .collect::<Result<Vec<_>, _>>()?;

    let owned = OwnedAdapters::from_config(cfg);
    let pipeline = Pipeline::new(cfg.clone(), owned.adapters())?;
    let baseline = if args.baseline {
        Some(Pipeline::new(cfg.baseline(), owned.adapters())?)
    } else {
        None
    };
    let result = evaluate(&pipeline, baseline.as_ref(), &frames, &gts)?;

    let court_id = args.court_id.clone().unwrap_or_else(|| {
        args.input
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "-".into())
    });
    crate::emit(&result.report(&court_id))?;
    if let Some(path) = &args.report {
        write_parent(path)?;
        std::fs::write(path, serde_json::to_string_pretty(&result)?)?;
    }
    Ok(Outcome::Done)
}

pub fn synth(out: &Path, count: usize, seed: u64, gen_config: Option<&Path>) -> Result<Outcome, CliError> {
    let gen = match gen_config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<GenConfig>(&text)?
        }
        None => GenConfig::default(),
    };
    let template = standard_template(gen.court).map_err(|e| CliError::Input(e.to_string()))?;
    std::fs::create_dir_all(out)?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let scene = generate_scene_with(mix_seed(seed, i as u64), &gen, &template, format!("synth-{i:04}"))?;
            scene.write(out, &template)?;
            Ok(())
        })
        .collect::<Result<Vec<()>, CliError>>()?;
    Ok(Outcome::Done)
}
