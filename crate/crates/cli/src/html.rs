//! Static result gallery: one page plus a directory of PNG thumbnails.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use image::{imageops, RgbImage};
use log::warn;
use rbir::imaging::{decode_file, RasterImage};
use rbir::signatures::ImageId;

const THUMB: u32 = 160;

pub struct Row {
    pub rank: usize,
    pub id: ImageId,
    pub distance: f64,
    pub label: String,
    pub path: PathBuf,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn write_thumbnail(img: &RasterImage, path: &Path) -> anyhow::Result<()> {
    let rgb = RgbImage::from_raw(img.width() as u32, img.height() as u32, img.to_rgb8())
        .context("image buffer has the wrong size")?;
    let scale = (THUMB as f64 / rgb.width().max(rgb.height()) as f64).min(1.0);
    let w = ((rgb.width() as f64 * scale).round() as u32).max(1);
    let h = ((rgb.height() as f64 * scale).round() as u32).max(1);
    imageops::thumbnail(&rgb, w, h)
        .save(path)
        .with_context(|| format!("cannot write {}", path.display()))
}

/// Writes `out` and `<out stem>_files/`. Results whose image can no longer
/// be read are listed without a thumbnail.
pub fn write_gallery(out: &Path, query_path: &Path, query: &RasterImage, rows: &[Row]) -> anyhow::Result<()> {
    let stem = out.file_stem().map_or_else(|| "gallery".into(), |s| s.to_string_lossy().into_owned());
    let dir_name = format!("{stem}_files");
    let dir = out.parent().unwrap_or(Path::new("")).join(&dir_name);
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;

    write_thumbnail(query, &dir.join("query.png"))?;
    let mut page = String::new();
    let _ = writeln!(page, "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">");
    let _ = writeln!(page, "<title>Results for {}</title>", escape(&query_path.display().to_string()));
    let _ = writeln!(
        page,
        "<style>body{{font-family:sans-serif}} figure{{display:inline-block;margin:8px;text-align:center}} \
         img{{max-width:{THUMB}px;max-height:{THUMB}px}}</style>\n</head>\n<body>"
    );
    let _ = writeln!(page, "<h1>Query</h1>");
    let _ = writeln!(
        page,
        "<figure><img src=\"{dir_name}/query.png\" alt=\"query\"><figcaption>{}</figcaption></figure>",
        escape(&query_path.display().to_string())
    );
    let _ = writeln!(page, "<h1>Results</h1>");
    for row in rows {
        let name = format!("{:03}_{}.png", row.rank, row.id);
        let thumb = match decode_file(&row.path) {
            Ok(img) => write_thumbnail(&img, &dir.join(&name)).map(|_| name),
            Err(e) => Err(e.into()),
        };
        let img = match thumb {
            Ok(name) => format!("<img src=\"{dir_name}/{name}\" alt=\"image {}\">", row.id),
            Err(e) => {
                warn!("no thumbnail for {}: {e:#}", row.path.display());
                "<p>(image unavailable)</p>".to_string()
            }
        };
        let _ = writeln!(
            page,
            "<figure>{img}<figcaption>#{} id {} <b>{}</b><br>distance {}<br>{}</figcaption></figure>",
            row.rank,
            row.id,
            escape(&row.label),
            row.distance,
            escape(&row.path.display().to_string())
        );
    }
    let _ = writeln!(page, "</body>\n</html>");
    fs::write(out, page).with_context(|| format!("cannot write {}", out.display()))
}
