//! Image to signature, and dataset to index.

use std::path::Path;

use log::info;
use rayon::prelude::*;

use crate::config::{Config, ThetaSetting};
use crate::emd::EmdMetric;
use crate::error::{Error, Result};
use crate::eval::LabeledDataset;
use crate::features::extract_feature_regions;
use crate::imaging::{decode_file, resize_to_square, RasterImage};
use crate::sgraph::{estimate_theta, SignatureGraph};
use crate::signatures::{image_signature, ColorPalette, ImageId, ImageSignature};
use crate::store::{Catalog, CatalogEntry, Index};

/// Resample, detect regions, quantize and encode.
pub fn signature_for_image(
    img: &RasterImage,
    id: ImageId,
    config: &Config,
    palette: &ColorPalette,
) -> Result<ImageSignature> {
    let img = resize_to_square(img, config.size)?;
    let regions = extract_feature_regions(&img, &config.features)?;
    image_signature(id, &regions, &img, palette, config.block_width)
}

pub fn signature_for_file(
    path: impl AsRef<Path>,
    id: ImageId,
    config: &Config,
    palette: &ColorPalette,
) -> Result<ImageSignature> {
    let img = decode_file(path.as_ref())?;
    signature_for_image(&img, id, config, palette)
}

/// Signatures for every dataset entry, computed in parallel, returned in
/// dataset order.
pub fn dataset_signatures(
    dataset: &LabeledDataset,
    config: &Config,
    palette: &ColorPalette,
) -> Result<Vec<ImageSignature>> {
    dataset
        .entries
        .par_iter()
        .map(|e| {
            signature_for_file(&e.path, e.id, config, palette).map_err(|err| match err {
                Error::Io(io) => Error::Dataset(format!("{}: {io}", e.path.display())),
                other => Error::Dataset(format!("{}: {other}", e.path.display())),
            })
        })
        .collect()
}

/// Builds the complete index: signatures in parallel, then sequential graph
/// insertion in dataset order.
pub fn build_index(dataset: &LabeledDataset, config: &Config) -> Result<Index> {
    config.validate()?;
    let palette = config.load_palette()?;
    let signatures = dataset_signatures(dataset, config, &palette)?;
    info!("extracted {} signatures", signatures.len());
    index_from_signatures(dataset, config, palette, signatures)
}

pub fn index_from_signatures(
    dataset: &LabeledDataset,
    config: &Config,
    palette: ColorPalette,
    signatures: Vec<ImageSignature>,
) -> Result<Index> {
    let metric = EmdMetric::new(&palette);
    let theta = match config.theta {
        ThetaSetting::Fixed(t) => t,
        ThetaSetting::Auto => estimate_theta(&signatures, &metric, config.theta_sample)?,
    };
    info!("theta = {theta}");
    let mut graph = SignatureGraph::new(theta, config.k_edge)?;
    for sig in signatures {
        graph.assign_image(sig, &metric)?;
    }
    if graph.is_empty() {
        return Err(Error::EmptyInput("dataset has no images"));
    }
    let entries = dataset
        .entries
        .iter()
        .map(|e| CatalogEntry { id: e.id, label: e.label.clone(), path: e.relative.clone() })
        .collect();
    Ok(Index {
        config: config.clone(),
        palette,
        graph,
        catalog: Catalog { root: dataset.root.display().to_string(), entries },
    })
}
