//! Task families: transition semantics, synthetic dataset generation and the
//! closed-form attribute oracles that make consistency claims checkable
//! without a learned classifier.

mod domains;
mod inpaint;
mod shapes;

pub use domains::{domain_stat, gen_multi_domain, oracle_domain, render_domain, DOMAIN_SIDE};
pub use inpaint::{apply_mask, gen_inpaint, INPAINT_D_T};
pub use shapes::{
    gen_shapes_attr, oracle_shapes, render_shapes, shapes_color_stat, shapes_stat, ShapesAttrs,
    ATTR_BORDER, ATTR_BRIGHTNESS, ATTR_COLOR, ATTR_SIZE, N_LOGICAL_ATTRS, SHAPES_D_T, SHAPES_SIDE,
};

use crate::error::{Error, Result};
use crate::scalar::{dbl, fl, Scalar};
use crate::types::{make_triplet, ImageBatch, Transition, Triplet};
use ndarray::{Array1, Array2, Array3, Array4};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Attribute annotation of one image. For attribute tasks the entries live in
/// `{-1, +1}`; for domain tasks the vector is a one-hot domain indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeVector {
    pub z: Vec<f64>,
}

impl AttributeVector {
    pub fn new(z: Vec<f64>) -> Self {
        AttributeVector { z }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    AttrEdit,
    MultiDomain,
    Inpaint,
}

impl TaskKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "attr_edit" => Ok(TaskKind::AttrEdit),
            "multi_domain" => Ok(TaskKind::MultiDomain),
            "inpaint" => Ok(TaskKind::Inpaint),
            other => Err(Error::Config(format!(
                "unknown task `{other}` (expected attr_edit, multi_domain or inpaint)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::AttrEdit => "attr_edit",
            TaskKind::MultiDomain => "multi_domain",
            TaskKind::Inpaint => "inpaint",
        }
    }
}

/// Transition semantics, oracle and negation rules of one task family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskAdapter {
    pub kind: TaskKind,
    pub d_t: usize,
    /// Domain count for the multi-domain task.
    pub k_domains: usize,
    /// Square mask side in pixels for the inpainting task.
    pub mask_size: usize,
}

impl TaskAdapter {
    pub fn attr_edit() -> Self {
        TaskAdapter {
            kind: TaskKind::AttrEdit,
            d_t: SHAPES_D_T,
            k_domains: 0,
            mask_size: 0,
        }
    }

    pub fn multi_domain(k: usize) -> Self {
        TaskAdapter {
            kind: TaskKind::MultiDomain,
            d_t: k,
            k_domains: k,
            mask_size: 0,
        }
    }

    pub fn inpaint(mask_size: usize) -> Self {
        TaskAdapter {
            kind: TaskKind::Inpaint,
            d_t: INPAINT_D_T,
            k_domains: 0,
            mask_size,
        }
    }

    /// Raw transition between two annotations. For attribute tasks this is
    /// the plain difference `z_y - z_x` (the loader rescales by 1/2); for
    /// domain tasks it is the mean-centered one-hot of the target domain.
    pub fn make_transition(&self, z_x: &AttributeVector, z_y: &AttributeVector) -> Vec<f64> {
        match self.kind {
            TaskKind::AttrEdit => z_x.z.iter().zip(&z_y.z).map(|(&a, &b)| b - a).collect(),
            TaskKind::MultiDomain => {
                let k = self.k_domains as f64;
                z_y.z.iter().map(|&v| v - 1.0 / k).collect()
            }
            TaskKind::Inpaint => {
                panic!("inpainting transitions come from mask geometry, not annotations")
            }
        }
    }

    /// Scale applied to raw attribute differences when a dataset is built,
    /// keeping transitions on the prior's scale.
    pub fn load_scale(&self) -> f64 {
        match self.kind {
            TaskKind::AttrEdit => 0.5,
            _ => 1.0,
        }
    }

    /// Transition negation. Elementwise for additive semantics; the
    /// inpainting adapter flips only the direction coordinate, since negating
    /// mask coordinates would corrupt the location.
    pub fn negate<F: Scalar>(&self, t: &Transition<F>) -> Transition<F> {
        match self.kind {
            TaskKind::Inpaint => {
                let mut data = t.data().clone();
                let last = data.ncols() - 1;
                for mut row in data.rows_mut() {
                    row[last] = -row[last];
                }
                Transition::new(data).expect("negate keeps validity")
            }
            _ => crate::types::negate_transition(t),
        }
    }

    /// Closed-form attribute readout on one image.
    pub fn oracle<F: Scalar>(&self, image: &Array3<F>) -> AttributeVector {
        match self.kind {
            TaskKind::AttrEdit => oracle_shapes(image),
            TaskKind::MultiDomain => oracle_domain(image, self.k_domains),
            TaskKind::Inpaint => oracle_shapes(image),
        }
    }

    /// Continuous statistic backing the interpolation probe, indexed by
    /// logical attribute.
    pub fn continuous_stat<F: Scalar>(&self, image: &Array3<F>, attr: usize) -> f64 {
        match self.kind {
            TaskKind::AttrEdit => shapes_stat(image, attr),
            TaskKind::MultiDomain => domain_stat(image, attr),
            TaskKind::Inpaint => shapes_stat(image, attr),
        }
    }
}

/// One dataset row. Annotations are kept for oracle checks and edit batteries.
#[derive(Debug, Clone)]
pub struct Sample<F: Scalar> {
    pub x: Array3<F>,
    pub y: Array3<F>,
    pub t: Array1<F>,
    pub paired: bool,
    pub z_x: AttributeVector,
    pub z_y: AttributeVector,
    /// Inpainting mask geometry `(cx_frac, cy_frac)` when applicable.
    pub mask_center: Option<(f64, f64)>,
}

/// In-memory dataset plus its task adapter.
pub struct Dataset<F: Scalar> {
    pub adapter: TaskAdapter,
    pub seed: u64,
    pub samples: Vec<Sample<F>>,
}

impl<F: Scalar> Dataset<F> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn side(&self) -> usize {
        self.samples[0].x.dim().1
    }

    pub fn channels(&self) -> usize {
        self.samples[0].x.dim().0
    }

    /// Stack the given rows into one training triplet.
    pub fn make_batch(&self, idxs: &[usize]) -> Result<Triplet<F>> {
        assert!(!idxs.is_empty());
        let (c, h, w) = self.samples[idxs[0]].x.dim();
        let d_t = self.samples[idxs[0]].t.len();
        let mut x = Array4::<F>::zeros((idxs.len(), c, h, w));
        let mut y = Array4::<F>::zeros((idxs.len(), c, h, w));
        let mut t = Array2::<F>::zeros((idxs.len(), d_t));
        let mut paired = true;
        for (row, &i) in idxs.iter().enumerate() {
            let s = &self.samples[i];
            x.index_axis_mut(ndarray::Axis(0), row).assign(&s.x);
            y.index_axis_mut(ndarray::Axis(0), row).assign(&s.y);
            t.index_axis_mut(ndarray::Axis(0), row).assign(&s.t);
            paired &= s.paired;
        }
        make_triplet(
            ImageBatch::new(x)?,
            Transition::new(t)?,
            ImageBatch::new(y)?,
            paired,
        )
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetMeta {
    version: u32,
    task: TaskKind,
    n: usize,
    seed: u64,
    d_t: usize,
    k_domains: usize,
    mask_size: usize,
    side: usize,
}

fn to_u8<F: Scalar>(img: &Array3<F>) -> Vec<u8> {
    let (c, h, w) = img.dim();
    assert_eq!(c, 3, "png export expects 3 channels");
    let mut buf = vec![0u8; h * w * 3];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let v = dbl(img[[ch, y, x]]);
                let q = ((v + 1.0) / 2.0 * 255.0).round().clamp(0.0, 255.0) as u8;
                buf[(y * w + x) * 3 + ch] = q;
            }
        }
    }
    buf
}

fn from_u8<F: Scalar>(buf: &[u8], h: usize, w: usize) -> Array3<F> {
    let mut img = Array3::<F>::zeros((3, h, w));
    for y in 0..h {
        for x in 0..w {
            for ch in 0..3 {
                let q = buf[(y * w + x) * 3 + ch] as f64;
                img[[ch, y, x]] = fl(q / 255.0 * 2.0 - 1.0);
            }
        }
    }
    img
}

/// Save one image tensor (`[3, h, w]`, values in `[-1, 1]`) as PNG.
pub fn save_png<F: Scalar>(img: &Array3<F>, path: &Path) -> Result<()> {
    let (_, h, w) = img.dim();
    let buf = to_u8(img);
    image::save_buffer(
        path,
        &buf,
        w as u32,
        h as u32,
        image::ExtendedColorType::Rgb8,
    )?;
    Ok(())
}

pub fn load_png<F: Scalar>(path: &Path) -> Result<Array3<F>> {
    let img = image::open(path)?.into_rgb8();
    let (w, h) = img.dimensions();
    Ok(from_u8(img.as_raw(), h as usize, w as usize))
}

/// Persist a dataset as PNG images plus a CSV manifest (the source of truth
/// for annotations and transitions) and a small JSON metadata sidecar.
pub fn save_dataset<F: Scalar>(ds: &Dataset<F>, dir: &Path) -> Result<()> {
    let images = dir.join("images");
    std::fs::create_dir_all(&images)?;
    let meta = DatasetMeta {
        version: 1,
        task: ds.adapter.kind,
        n: ds.len(),
        seed: ds.seed,
        d_t: ds.adapter.d_t,
        k_domains: ds.adapter.k_domains,
        mask_size: ds.adapter.mask_size,
        side: ds.side(),
    };
    std::fs::write(
        dir.join("meta.json"),
        serde_json::to_string_pretty(&meta).map_err(|e| Error::Dataset(format!("meta: {e}")))?,
    )?;

    let d_z = ds.samples[0].z_x.z.len();
    let d_t = ds.adapter.d_t;
    let mut wtr = csv::Writer::from_path(dir.join("manifest.csv"))?;
    let mut header = vec!["x_file".to_string(), "y_file".to_string(), "paired".to_string()];
    header.extend((0..d_z).map(|i| format!("zx{i}")));
    header.extend((0..d_z).map(|i| format!("zy{i}")));
    header.extend((0..d_t).map(|i| format!("t{i}")));
    header.push("mask_cx".into());
    header.push("mask_cy".into());
    wtr.write_record(&header)?;
    for (i, s) in ds.samples.iter().enumerate() {
        let xf = format!("images/{i:06}_x.png");
        let yf = format!("images/{i:06}_y.png");
        save_png(&s.x, &dir.join(&xf))?;
        save_png(&s.y, &dir.join(&yf))?;
        let mut rec = vec![xf, yf, s.paired.to_string()];
        rec.extend(s.z_x.z.iter().map(|v| format!("{v}")));
        rec.extend(s.z_y.z.iter().map(|v| format!("{v}")));
        rec.extend(s.t.iter().map(|&v| format!("{}", dbl(v))));
        match s.mask_center {
            Some((cx, cy)) => {
                rec.push(format!("{cx}"));
                rec.push(format!("{cy}"));
            }
            None => {
                rec.push(String::new());
                rec.push(String::new());
            }
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn load_dataset<F: Scalar>(dir: &Path) -> Result<Dataset<F>> {
    let meta_path = dir.join("meta.json");
    let meta: DatasetMeta = serde_json::from_str(
        &std::fs::read_to_string(&meta_path)
            .map_err(|e| Error::Dataset(format!("{}: {e}", meta_path.display())))?,
    )
    .map_err(|e| Error::Dataset(format!("meta.json: {e}")))?;
    let adapter = match meta.task {
        TaskKind::AttrEdit => TaskAdapter::attr_edit(),
        TaskKind::MultiDomain => TaskAdapter::multi_domain(meta.k_domains),
        TaskKind::Inpaint => TaskAdapter::inpaint(meta.mask_size),
    };
    let mut rdr = csv::Reader::from_path(dir.join("manifest.csv"))?;
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();
    let d_z = header.iter().filter(|h| h.starts_with("zx")).count();
    let d_t = header
        .iter()
        .filter(|h| {
            h.starts_with('t') && h.len() > 1 && h[1..].chars().all(|c| c.is_ascii_digit())
        })
        .count();
    if d_t != meta.d_t {
        return Err(Error::Dataset(format!(
            "manifest has {d_t} transition columns, meta says {}",
            meta.d_t
        )));
    }
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: usize| -> Result<&str> {
            rec.get(i)
                .ok_or_else(|| Error::Dataset("short manifest row".into()))
        };
        let x = load_png::<F>(&dir.join(get(0)?))?;
        let y = load_png::<F>(&dir.join(get(1)?))?;
        let paired = get(2)? == "true";
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::Dataset(format!("bad number `{s}`: {e}")))
        };
        let mut at = 3;
        let mut z_x = Vec::with_capacity(d_z);
        for _ in 0..d_z {
            z_x.push(parse(get(at)?)?);
            at += 1;
        }
        let mut z_y = Vec::with_capacity(d_z);
        for _ in 0..d_z {
            z_y.push(parse(get(at)?)?);
            at += 1;
        }
        let mut t = Vec::with_capacity(d_t);
        for _ in 0..d_t {
            t.push(fl::<F>(parse(get(at)?)?));
            at += 1;
        }
        let mask_center = {
            let cx = get(at)?;
            let cy = get(at + 1)?;
            if cx.is_empty() {
                None
            } else {
                Some((parse(cx)?, parse(cy)?))
            }
        };
        samples.push(Sample {
            x,
            y,
            t: Array1::from_vec(t),
            paired,
            z_x: AttributeVector::new(z_x),
            z_y: AttributeVector::new(z_y),
            mask_center,
        });
    }
    if samples.is_empty() {
        return Err(Error::Dataset("dataset is empty".into()));
    }
    Ok(Dataset {
        adapter,
        seed: meta.seed,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attr_transition_is_componentwise_difference() {
        let a = TaskAdapter::attr_edit();
        let zx = AttributeVector::new(vec![1.0, -1.0, -1.0, 1.0, -1.0, 1.0]);
        let zy = AttributeVector::new(vec![-1.0, -1.0, 1.0, 1.0, -1.0, 1.0]);
        let t = a.make_transition(&zx, &zy);
        assert_eq!(t, vec![-2.0, 0.0, 2.0, 0.0, 0.0, 0.0]);
        let t0 = a.make_transition(&zx, &zx);
        assert!(t0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn attr_transition_additivity_and_negation() {
        let a = TaskAdapter::attr_edit();
        let za = AttributeVector::new(vec![1.0, -1.0, -1.0, 1.0, 1.0, -1.0]);
        let zb = AttributeVector::new(vec![-1.0, 1.0, -1.0, 1.0, -1.0, -1.0]);
        let zc = AttributeVector::new(vec![-1.0, -1.0, 1.0, -1.0, -1.0, 1.0]);
        let ab = a.make_transition(&za, &zb);
        let bc = a.make_transition(&zb, &zc);
        let ac = a.make_transition(&za, &zc);
        let sum: Vec<f64> = ab.iter().zip(&bc).map(|(x, y)| x + y).collect();
        assert_eq!(sum, ac);
        let ba = a.make_transition(&zb, &za);
        let neg: Vec<f64> = ab.iter().map(|v| -v).collect();
        assert_eq!(neg, ba);
    }
}
