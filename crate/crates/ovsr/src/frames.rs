//! Frame directories: 8-bit RGB PNGs named `00000000.png`, `00000001.png`, ...

use std::fs;
use std::path::{Path, PathBuf};

use ovsr_core::{Scalar, Tensor};

use crate::error::{Error, Result};

pub fn frame_name(index: usize) -> String {
    format!("{index:08}.png")
}

/// Frame paths of `dir` in index order. Indices must run 0, 1, 2, ...
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let bad = |msg: String| Error::Frames {
        path: dir.to_path_buf(),
        msg,
    };
    let mut indexed = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(stem) = name.strip_suffix(".png") else {
            continue;
        };
        if stem.len() == 8 && stem.bytes().all(|b| b.is_ascii_digit()) {
            indexed.push((stem.parse::<usize>().expect("eight digits"), path));
        }
    }
    indexed.sort();
    if indexed.is_empty() {
        return Err(bad("no %08d.png frames".into()));
    }
    if let Some((i, (n, _))) = indexed.iter().enumerate().find(|(i, (n, _))| i != n) {
        return Err(bad(format!("frame {i} is missing (next is {n})")));
    }
    Ok(indexed.into_iter().map(|(_, p)| p).collect())
}

pub fn read_frame(path: &Path) -> Result<Tensor> {
    let img = image::open(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .to_rgb8();
    let (w, h) = img.dimensions();
    Ok(Tensor::from_fn([1, 3, h as usize, w as usize], |_, c, y, x| {
        img.get_pixel(x as u32, y as u32)[c] as Scalar / 255.0
    }))
}

/// Every frame of `dir`, checked for a common size.
pub fn read_frames(dir: &Path) -> Result<Vec<Tensor>> {
    let frames = list_frames(dir)?.iter().map(|p| read_frame(p)).collect::<Result<Vec<_>>>()?;
    if let Some(f) = frames.iter().find(|f| f.shape() != frames[0].shape()) {
        return Err(Error::Frames {
            path: dir.to_path_buf(),
            msg: format!("mixed frame sizes {:?} and {:?}", frames[0].shape(), f.shape()),
        });
    }
    Ok(frames)
}

/// Rounds `[0, 1]` values to 8 bits; values outside are clamped.
pub fn quantize(frame: &Tensor) -> Result<(u32, u32, Vec<u8>)> {
    let [b, c, h, w] = frame.shape();
    if b != 1 || c != 3 {
        return Err(Error::Frames {
            path: PathBuf::new(),
            msg: format!("cannot write a {b}x{c} channel tensor as RGB"),
        });
    }
    let mut buf = Vec::with_capacity(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            for ch in 0..3 {
                let v = (frame.at(0, ch, y, x) as f64).clamp(0.0, 1.0);
                buf.push((v * 255.0).round() as u8);
            }
        }
    }
    Ok((w as u32, h as u32, buf))
}

pub fn write_frame(path: &Path, frame: &Tensor) -> Result<()> {
    let (w, h, buf) = quantize(frame)?;
    image::save_buffer(path, &buf, w, h, image::ExtendedColorType::Rgb8).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `frames` as `dir/%08d.png`, creating `dir` if needed.
pub fn write_frames(dir: &Path, frames: &[Tensor]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, f) in frames.iter().enumerate() {
        write_frame(&dir.join(frame_name(i)), f)?;
    }
    Ok(())
}

/// Subdirectories of `root` that hold frames, sorted by name. Each one is a
/// clip or sequence.
pub fn list_sequences(root: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.is_dir() {
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            dirs.push((name, path));
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Frames {
            path: root.to_path_buf(),
            msg: "no sequence subdirectories".into(),
        });
    }
    Ok(dirs)
}
