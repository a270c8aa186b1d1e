//! Labeled / unlabeled / test splits and the `VRDS` dataset file.
//!
//! Layout (little-endian): `VRDS`, u32 version, u32 labeled count, u32
//! unlabeled count, u32 test count, then every example in split order as
//! u32 height, u32 width, u8 truth flag, the truth image (`height * width`
//! f64, present only when the flag is 1), u64 sample count M, and the u, v,
//! re, im arrays of M f64 each. A length-prefixed UTF-8 provenance note
//! closes the file.

use std::fs;
use std::path::Path;

use rand::Rng;
use visrec_autodiff::binio::{ByteReader, ByteWriter, FormatError};

use super::coverage::{generate_coverage, ArrayConfig};
use super::sky::{generate_sky, SkyModelConfig};
use crate::error::{CoreError, Result};
use crate::interferometry::{sample_visibility, Image, SkyImage, UvCoverage, VisibilitySet};
use crate::rng::{derive_seed, rng_from_seed};

pub const DATASET_MAGIC: &[u8; 4] = b"VRDS";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub vis: VisibilitySet,
    pub truth: SkyImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledExample {
    pub vis: VisibilitySet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub grid_size: usize,
    pub labeled: Vec<LabeledExample>,
    pub unlabeled: Vec<UnlabeledExample>,
    pub test: Vec<LabeledExample>,
    /// Free-form record of the configs and seed that built the dataset.
    pub provenance: String,
}

impl Dataset {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.labeled.len(), self.unlabeled.len(), self.test.len())
    }

    /// Coverage of the first example (all examples of a built dataset share it).
    pub fn coverage(&self) -> Option<UvCoverage> {
        self.labeled
            .first()
            .map(|e| &e.vis)
            .or_else(|| self.test.first().map(|e| &e.vis))
            .or_else(|| self.unlabeled.first().map(|e| &e.vis))
            .map(VisibilitySet::coverage)
    }
}

const SPLIT_LABELED: u64 = 1;
const SPLIT_UNLABELED: u64 = 2;
const SPLIT_TEST: u64 = 3;

fn split_seed(seed: u64, split: u64, index: usize) -> (u64, u64) {
    let base = derive_seed(seed, split);
    (derive_seed(base, 2 * index as u64), derive_seed(base, 2 * index as u64 + 1))
}

/// Synthesizes skies, samples them on one shared coverage and assembles the
/// three splits. Each split draws from its own seed stream, so no sky is
/// shared between splits.
pub fn build_dataset(
    sky_cfg: &SkyModelConfig,
    array_cfg: &ArrayConfig,
    n_labeled: usize,
    n_unlabeled: usize,
    n_test: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    sky_cfg.validate()?;
    array_cfg.validate()?;
    if array_cfg.grid_size != sky_cfg.image_size {
        return Err(CoreError::invalid(
            "array grid_size",
            format!("{} does not match image_size {}", array_cfg.grid_size, sky_cfg.image_size),
        ));
    }
    let sky_seed = seed ^ sky_cfg.rng_seed;
    let skies = |split: u64, n: usize| -> Result<Vec<SkyImage>> {
        (0..n)
            .map(|i| generate_sky(sky_cfg, &mut rng_from_seed(split_seed(sky_seed, split, i).0)))
            .collect()
    };
    let provenance = format!(
        "seed = {seed}\nnoise_sigma = {noise_sigma}\nsky = {sky_cfg:?}\narray = {array_cfg:?}\n"
    );
    assemble(
        skies(SPLIT_LABELED, n_labeled)?,
        skies(SPLIT_UNLABELED, n_unlabeled)?,
        skies(SPLIT_TEST, n_test)?,
        array_cfg,
        noise_sigma,
        seed,
        provenance,
    )
}

/// Builds a dataset from caller-provided skies (for example images loaded
/// from `VRIM` files), taken in order: labeled, then unlabeled, then test.
pub fn build_dataset_from_images(
    images: Vec<SkyImage>,
    array_cfg: &ArrayConfig,
    n_labeled: usize,
    n_unlabeled: usize,
    n_test: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    array_cfg.validate()?;
    let need = n_labeled + n_unlabeled + n_test;
    if images.len() < need {
        return Err(CoreError::invalid("image set", format!("{} images for {need} examples", images.len())));
    }
    let mut it = images.into_iter();
    let labeled: Vec<_> = it.by_ref().take(n_labeled).collect();
    let unlabeled: Vec<_> = it.by_ref().take(n_unlabeled).collect();
    let test: Vec<_> = it.take(n_test).collect();
    let provenance = format!("seed = {seed}\nnoise_sigma = {noise_sigma}\nsky = imported\narray = {array_cfg:?}\n");
    assemble(labeled, unlabeled, test, array_cfg, noise_sigma, seed, provenance)
}

fn assemble(
    labeled: Vec<SkyImage>,
    unlabeled: Vec<SkyImage>,
    test: Vec<SkyImage>,
    array_cfg: &ArrayConfig,
    noise_sigma: f64,
    seed: u64,
    provenance: String,
) -> Result<Dataset> {
    if labeled.is_empty() && test.is_empty() {
        return Err(CoreError::invalid("split sizes", "n_labeled + n_test must be >= 1"));
    }
    let n = array_cfg.grid_size;
    if let Some(bad) = labeled.iter().chain(&unlabeled).chain(&test).find(|s| s.height() != n) {
        return Err(CoreError::ShapeMismatch {
            left: (bad.height(), bad.width()),
            right: (n, n),
        });
    }
    let cov_seed = derive_seed(seed ^ array_cfg.rng_seed, 0);
    let coverage = generate_coverage(array_cfg, &mut rng_from_seed(cov_seed))?;
    let observe = |split: u64, i: usize, sky: &SkyImage| {
        sample_visibility(sky, &coverage, noise_sigma, split_seed(seed, split, i).1)
    };
    let label = |split: u64, skies: Vec<SkyImage>| -> Result<Vec<LabeledExample>> {
        skies
            .into_iter()
            .enumerate()
            .map(|(i, truth)| Ok(LabeledExample { vis: observe(split, i, &truth)?, truth }))
            .collect()
    };
    let labeled = label(SPLIT_LABELED, labeled)?;
    let test = label(SPLIT_TEST, test)?;
    let unlabeled = unlabeled
        .iter()
        .enumerate()
        .map(|(i, sky)| Ok(UnlabeledExample { vis: observe(SPLIT_UNLABELED, i, sky)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        grid_size: n,
        labeled,
        unlabeled,
        test,
        provenance,
    })
}

fn write_example(w: &mut ByteWriter, n: usize, truth: Option<&SkyImage>, vis: &VisibilitySet) {
    w.u32(n as u32);
    w.u32(n as u32);
    match truth {
        Some(t) => {
            w.u8(1);
            w.f64s(t.intensity());
        }
        None => w.u8(0),
    }
    w.u64(vis.len() as u64);
    w.f64s(&vis.u);
    w.f64s(&vis.v);
    w.f64s(&vis.re);
    w.f64s(&vis.im);
}

pub fn encode_dataset(ds: &Dataset) -> Vec<u8> {
    let mut w = ByteWriter::header(DATASET_MAGIC, DATASET_VERSION);
    let (a, b, c) = ds.counts();
    w.u32(a as u32);
    w.u32(b as u32);
    w.u32(c as u32);
    for e in &ds.labeled {
        write_example(&mut w, ds.grid_size, Some(&e.truth), &e.vis);
    }
    for e in &ds.unlabeled {
        write_example(&mut w, ds.grid_size, None, &e.vis);
    }
    for e in &ds.test {
        write_example(&mut w, ds.grid_size, Some(&e.truth), &e.vis);
    }
    w.string(&ds.provenance);
    w.into_bytes()
}

struct RawExample {
    size: usize,
    truth: Option<SkyImage>,
    vis: VisibilitySet,
}

fn corrupt(offset: usize, reason: impl Into<String>) -> CoreError {
    CoreError::Format(FormatError::Corrupt {
        offset,
        reason: reason.into(),
    })
}

fn read_example(r: &mut ByteReader<'_>) -> Result<RawExample> {
    let at = r.offset();
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    if h != w {
        return Err(corrupt(at, format!("non-square grid {h}x{w}")));
    }
    let flag_at = r.offset();
    let truth = match r.u8()? {
        0 => None,
        1 => {
            let data = r.f64s(h.checked_mul(w).ok_or_else(|| corrupt(at, "grid size overflows"))?)?;
            let img = Image::new(h, w, data).map_err(|e| corrupt(flag_at, e.to_string()))?;
            Some(SkyImage::from_image(img).map_err(|e| corrupt(flag_at, e.to_string()))?)
        }
        f => return Err(corrupt(flag_at, format!("truth flag {f} is neither 0 nor 1"))),
    };
    let raw = r.u64()?;
    let m = r.count(raw, 32)?;
    let vis = VisibilitySet {
        u: r.f64s(m)?,
        v: r.f64s(m)?,
        re: r.f64s(m)?,
        im: r.f64s(m)?,
    };
    Ok(RawExample { size: h, truth, vis })
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = ByteReader::new(bytes);
    r.header(DATASET_MAGIC, DATASET_VERSION)?;
    let counts = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
    let mut grid_size = None;
    let mut splits: [Vec<RawExample>; 3] = Default::default();
    for (k, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            let at = r.offset();
            let ex = read_example(&mut r)?;
            if *grid_size.get_or_insert(ex.size) != ex.size {
                return Err(corrupt(at, format!("grid size {} differs from earlier examples", ex.size)));
            }
            let labeled_split = k != 1;
            if ex.truth.is_some() != labeled_split {
                return Err(corrupt(at, "truth flag does not match the example's split"));
            }
            splits[k].push(ex);
        }
    }
    let provenance = r.string()?;
    r.expect_end()?;
    let [labeled, unlabeled, test] = splits;
    let to_labeled = |v: Vec<RawExample>| {
        v.into_iter()
            .map(|e| LabeledExample {
                vis: e.vis,
                truth: e.truth.expect("checked above"),
            })
            .collect()
    };
    Ok(Dataset {
        grid_size: grid_size.unwrap_or(0),
        labeled: to_labeled(labeled),
        unlabeled: unlabeled.into_iter().map(|e| UnlabeledExample { vis: e.vis }).collect(),
        test: to_labeled(test),
        provenance,
    })
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_dataset(ds))?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    decode_dataset(&fs::read(path)?)
}

/// Shuffled copy of `items` drawn with `rng`; kept here so dataset tooling and
/// training share one definition.
pub fn shuffled_indices<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}
