use std::path::{Path, PathBuf};
use std::process::Command;

use courtcal::preprocess::{Frame, FrameInput};

use crate::CliError;

const SIDECAR_SUFFIXES: [&str; 2] = [".shadowmask.png", ".shadowfree.png"];

/// Frames on disk, in lexicographic file-name order.
pub struct FrameSource {
    pub paths: Vec<PathBuf>,
    /// Keeps a decoder's output directory alive.
    _scratch: Option<tempfile::TempDir>,
}

fn is_frame_file(path: &Path) -> bool {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    let ext_ok = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    ext_ok && !SIDECAR_SUFFIXES.iter().any(|s| name.ends_with(s))
}

fn list_frames(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_frame_file(p))
        .collect();
    paths.sort();
    Ok(paths)
}

impl FrameSource {
    /// A directory of PNG frames, a single PNG, or a video handed to
    /// `decoder` (argv with `{input}` and `{output_dir}` placeholders).
    pub fn open(input: &Path, decoder: Option<&[String]>) -> Result<Self, CliError> {
        if !input.exists() {
            return Err(CliError::Input(format!("{} does not exist", input.display())));
        }
        let (paths, scratch) = if input.is_dir() {
            (list_frames(input)?, None)
        } else if is_frame_file(input) {
            (vec![input.to_path_buf()], None)
        } else {
            let argv = decoder.ok_or_else(|| {
                CliError::Input(format!(
                    "{} is not a PNG frame; set video.decoder_command to decode videos",
                    input.display()
                ))
            })?;
            let dir = tempfile::tempdir()?;
            decode(argv, input, dir.path())?;
            (list_frames(dir.path())?, Some(dir))
        };
        if paths.is_empty() {
            return Err(CliError::Input(format!("no frames found in {}", input.display())));
        }
        Ok(Self {
            paths,
            _scratch: scratch,
        })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    /// Loads frame `index` with any sidecars stored next to it.
    pub fn load(&self, index: usize) -> Result<FrameInput, CliError> {
        load_frame(&self.paths[index])
    }
}

pub fn frame_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn load_frame(path: &Path) -> Result<FrameInput, CliError> {
    let image = image::open(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        .to_rgb8();
    let frame = Frame::new(frame_id(path), image)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    Ok(FrameInput::with_sidecars(frame, dir)?)
}

fn decode(argv: &[String], input: &Path, out: &Path) -> Result<(), CliError> {
    let (prog, args) = argv
        .split_first()
        .ok_or_else(|| CliError::Input("empty video.decoder_command".into()))?;
    let args: Vec<String> = args
        .iter()
        .map(|a| {
            a.replace("{input}", &input.to_string_lossy())
                .replace("{output_dir}", &out.to_string_lossy())
        })
        .collect();
    let status = Command::new(prog)
        .args(&args)
        .status()
        .map_err(|e| CliError::Input(format!("decoder {prog}: {e}")))?;
    if !status.success() {
        return Err(CliError::Input(format!("decoder {prog} exited with {status}")));
    }
    Ok(())
}
