//! Dense displacement fields, backward warping and flow estimators.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use image::{ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::imaging::LuminanceMap;
use crate::registry::{no_argument, required_argument, Registry};

/// Per-pixel displacement in pixels: `(u, v)` along x and y.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f64>,
    v: Vec<f64>,
}

const FLO_MAGIC: f32 = 202021.25;

impl FlowField {
    pub fn new(width: usize, height: usize, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != width * height || v.len() != width * height {
            return Err(Error::ShapeMismatch(format!("flow components do not match {width}x{height}")));
        }
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::Flow("displacements must be finite".into()));
        }
        Ok(Self { width, height, u, v })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, 0.0, 0.0)
    }

    pub fn constant(width: usize, height: usize, du: f64, dv: f64) -> Self {
        Self { width, height, u: vec![du; width * height], v: vec![dv; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    /// Reads a Middlebury `.flo` file.
    pub fn read_flo(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let bad = |why: &str| Error::Flow(format!("{}: {why}", path.display()));
        if bytes.len() < 12 {
            return Err(bad("truncated header"));
        }
        let word = |i: usize| -> [u8; 4] { bytes[i..i + 4].try_into().expect("4 bytes") };
        if f32::from_le_bytes(word(0)) != FLO_MAGIC {
            return Err(bad("bad magic number"));
        }
        let (w, h) = (i32::from_le_bytes(word(4)), i32::from_le_bytes(word(8)));
        if w <= 0 || h <= 0 {
            return Err(bad("non-positive size"));
        }
        let (w, h) = (w as usize, h as usize);
        if bytes.len() != 12 + 8 * w * h {
            return Err(bad("payload size does not match header"));
        }
        let mut u = Vec::with_capacity(w * h);
        let mut v = Vec::with_capacity(w * h);
        for i in 0..w * h {
            u.push(f32::from_le_bytes(word(12 + 8 * i)) as f64);
            v.push(f32::from_le_bytes(word(16 + 8 * i)) as f64);
        }
        Self::new(w, h, u, v)
    }

    /// Writes a Middlebury `.flo` file (32-bit floats).
    pub fn write_flo(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(12 + 8 * self.u.len());
        out.extend(FLO_MAGIC.to_le_bytes());
        out.extend((self.width as i32).to_le_bytes());
        out.extend((self.height as i32).to_le_bytes());
        for (a, b) in self.u.iter().zip(&self.v) {
            out.extend((*a as f32).to_le_bytes());
            out.extend((*b as f32).to_le_bytes());
        }
        fs::write(path, out)?;
        Ok(())
    }
}

fn sample(values: &[f64], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let top = values[y0 * w + x0] * (1.0 - fx) + values[y0 * w + x1] * fx;
    let bottom = values[y1 * w + x0] * (1.0 - fx) + values[y1 * w + x1] * fx;
    top * (1.0 - fy) + bottom * fy
}

fn warp_values(values: &[f64], w: usize, h: usize, flow: &FlowField) -> Vec<f64> {
    (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            sample(values, w, h, x + flow.u[i], y + flow.v[i])
        })
        .collect()
}

/// Backward warp: `out(x) = frame(x + flow(x))`, bilinear, coordinates clamped
/// to the frame border.
pub fn warp(frame: &LuminanceMap, flow: &FlowField) -> Result<LuminanceMap> {
    let (w, h) = (frame.width(), frame.height());
    if (flow.width, flow.height) != (w, h) {
        return Err(Error::ShapeMismatch(format!(
            "flow {}x{} vs frame {w}x{h}",
            flow.width, flow.height
        )));
    }
    let values = warp_values(frame.values(), w, h, flow);
    Ok(if frame.is_normalized() {
        LuminanceMap::normalized(w, h, values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())?
    } else {
        LuminanceMap::raw(w, h, values.into_iter().map(|v| v.max(0.0)).collect())?
    })
}

/// Dense motion between two frames: the returned field maps coordinates of
/// `f1` to the matching coordinates of `f2`, so `f1(x) ≈ f2(x + flow(x))`.
pub trait FlowEstimator {
    fn name(&self) -> String;

    fn estimate(&self, f1: &LuminanceMap, f2: &LuminanceMap) -> Result<FlowField>;
}

fn check_pair(f1: &LuminanceMap, f2: &LuminanceMap) -> Result<(usize, usize)> {
    if (f1.width(), f1.height()) != (f2.width(), f2.height()) {
        return Err(Error::ShapeMismatch(format!(
            "frames {}x{} and {}x{}",
            f1.width(),
            f1.height(),
            f2.width(),
            f2.height()
        )));
    }
    Ok((f1.width(), f1.height()))
}

/// Always reports no motion.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroFlow;

impl FlowEstimator for ZeroFlow {
    fn name(&self) -> String {
        "zero".into()
    }

    fn estimate(&self, f1: &LuminanceMap, f2: &LuminanceMap) -> Result<FlowField> {
        let (w, h) = check_pair(f1, f2)?;
        Ok(FlowField::zeros(w, h))
    }
}

/// Coarse-to-fine estimator: exhaustive block matching on the coarsest level
/// of an image pyramid, then iterative Lucas–Kanade refinement and a 3×3
/// median filter on every level.
#[derive(Clone, Debug)]
pub struct BuiltinFlow {
    pub levels: usize,
    /// Search radius of the block matching, in coarsest-level pixels.
    pub search_radius: i64,
    pub block_radius: usize,
    pub window_radius: usize,
    pub iterations: usize,
}

impl Default for BuiltinFlow {
    fn default() -> Self {
        Self { levels: 3, search_radius: 3, block_radius: 3, window_radius: 3, iterations: 5 }
    }
}

#[derive(Clone)]
struct Img {
    w: usize,
    h: usize,
    v: Vec<f64>,
}

impl Img {
    fn at(&self, x: i64, y: i64) -> f64 {
        let x = x.clamp(0, self.w as i64 - 1) as usize;
        let y = y.clamp(0, self.h as i64 - 1) as usize;
        self.v[y * self.w + x]
    }

    fn half(&self) -> Img {
        let (w, h) = (self.w / 2, self.h / 2);
        let mut v = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let (a, b) = (2 * x, 2 * y);
                v.push(0.25 * (self.v[b * self.w + a] + self.v[b * self.w + a + 1] + self.v[(b + 1) * self.w + a] + self.v[(b + 1) * self.w + a + 1]));
            }
        }
        Img { w, h, v }
    }

    /// Sum over a `(2r+1)²` window with clamped borders.
    fn box_sum(&self, r: usize) -> Img {
        let r = r as i64;
        let mut tmp = vec![0.0; self.w * self.h];
        for y in 0..self.h as i64 {
            for x in 0..self.w as i64 {
                tmp[y as usize * self.w + x as usize] = (-r..=r).map(|d| self.at(x + d, y)).sum();
            }
        }
        let t = Img { w: self.w, h: self.h, v: tmp };
        let mut out = vec![0.0; self.w * self.h];
        for y in 0..self.h as i64 {
            for x in 0..self.w as i64 {
                out[y as usize * self.w + x as usize] = (-r..=r).map(|d| t.at(x, y + d)).sum();
            }
        }
        Img { w: self.w, h: self.h, v: out }
    }
}

fn median3x3(v: &[f64], w: usize, h: usize) -> Vec<f64> {
    let img = Img { w, h, v: v.to_vec() };
    let mut out = Vec::with_capacity(w * h);
    let mut win = [0.0; 9];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut n = 0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    win[n] = img.at(x + dx, y + dy);
                    n += 1;
                }
            }
            win.sort_by(f64::total_cmp);
            out.push(win[4]);
        }
    }
    out
}

impl BuiltinFlow {
    fn block_match(&self, a: &Img, b: &Img) -> (Vec<f64>, Vec<f64>) {
        let (r, br) = (self.search_radius, self.block_radius as i64);
        let mut candidates: Vec<(i64, i64)> = (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dx, dy))).collect();
        // Prefer small displacements when costs tie.
        candidates.sort_by_key(|&(dx, dy)| (dx * dx + dy * dy, dy, dx));
        let mut u = vec![0.0; a.w * a.h];
        let mut v = vec![0.0; a.w * a.h];
        for y in 0..a.h as i64 {
            for x in 0..a.w as i64 {
                let mut best = (f64::INFINITY, 0, 0);
                for &(dx, dy) in &candidates {
                    let mut cost = 0.0;
                    for by in -br..=br {
                        for bx in -br..=br {
                            cost += (a.at(x + bx, y + by) - b.at(x + bx + dx, y + by + dy)).abs();
                        }
                    }
                    if cost < best.0 {
                        best = (cost, dx, dy);
                    }
                }
                let i = y as usize * a.w + x as usize;
                u[i] = best.1 as f64;
                v[i] = best.2 as f64;
            }
        }
        (u, v)
    }

    fn refine(&self, a: &Img, b: &Img, u: &mut [f64], v: &mut [f64]) {
        let (w, h) = (a.w, a.h);
        for _ in 0..self.iterations {
            let flow = FlowField { width: w, height: h, u: u.to_vec(), v: v.to_vec() };
            let bw = Img { w, h, v: warp_values(&b.v, w, h, &flow) };
            let mut ix = vec![0.0; w * h];
            let mut iy = vec![0.0; w * h];
            let mut it = vec![0.0; w * h];
            for y in 0..h as i64 {
                for x in 0..w as i64 {
                    let i = y as usize * w + x as usize;
                    let avg = |xx: i64, yy: i64| 0.5 * (a.at(xx, yy) + bw.at(xx, yy));
                    ix[i] = 0.5 * (avg(x + 1, y) - avg(x - 1, y));
                    iy[i] = 0.5 * (avg(x, y + 1) - avg(x, y - 1));
                    it[i] = bw.v[i] - a.v[i];
                }
            }
            let prod = |p: &[f64], q: &[f64]| Img { w, h, v: p.iter().zip(q).map(|(s, t)| s * t).collect() }.box_sum(self.window_radius);
            let (a11, a12, a22) = (prod(&ix, &ix), prod(&ix, &iy), prod(&iy, &iy));
            let (b1, b2) = (prod(&ix, &it), prod(&iy, &it));
            let energy = a11.v.iter().zip(&a22.v).map(|(p, q)| p + q).sum::<f64>() / (w * h) as f64;
            let reg = 1e-3 * energy + 1e-12;
            for i in 0..w * h {
                let (m11, m12, m22) = (a11.v[i] + reg, a12.v[i], a22.v[i] + reg);
                let det = m11 * m22 - m12 * m12;
                if det <= 0.0 {
                    continue;
                }
                let du = -(m22 * b1.v[i] - m12 * b2.v[i]) / det;
                let dv = -(m11 * b2.v[i] - m12 * b1.v[i]) / det;
                u[i] += du.clamp(-1.0, 1.0);
                v[i] += dv.clamp(-1.0, 1.0);
            }
        }
        let mu = median3x3(u, w, h);
        let mv = median3x3(v, w, h);
        u.copy_from_slice(&mu);
        v.copy_from_slice(&mv);
    }
}

impl FlowEstimator for BuiltinFlow {
    fn name(&self) -> String {
        "builtin".into()
    }

    fn estimate(&self, f1: &LuminanceMap, f2: &LuminanceMap) -> Result<FlowField> {
        let (w, h) = check_pair(f1, f2)?;
        let mut pa = vec![Img { w, h, v: f1.values().to_vec() }];
        let mut pb = vec![Img { w, h, v: f2.values().to_vec() }];
        while pa.len() < self.levels.max(1) {
            let last = pa.last().expect("nonempty");
            if last.w / 2 < 8 || last.h / 2 < 8 {
                break;
            }
            let (na, nb) = (last.half(), pb.last().expect("nonempty").half());
            pa.push(na);
            pb.push(nb);
        }
        let coarsest = pa.len() - 1;
        let (mut u, mut v) = self.block_match(&pa[coarsest], &pb[coarsest]);
        for level in (0..=coarsest).rev() {
            let (a, b) = (&pa[level], &pb[level]);
            if level < coarsest {
                let prev = &pa[level + 1];
                let pf = FlowField { width: prev.w, height: prev.h, u: u.clone(), v: v.clone() };
                let mut nu = Vec::with_capacity(a.w * a.h);
                let mut nv = Vec::with_capacity(a.w * a.h);
                let (sx, sy) = (prev.w as f64 / a.w as f64, prev.h as f64 / a.h as f64);
                for y in 0..a.h {
                    for x in 0..a.w {
                        let (cx, cy) = ((x as f64 + 0.5) * sx - 0.5, (y as f64 + 0.5) * sy - 0.5);
                        nu.push(2.0 * sample(&pf.u, prev.w, prev.h, cx, cy));
                        nv.push(2.0 * sample(&pf.v, prev.w, prev.h, cx, cy));
                    }
                }
                u = nu;
                v = nv;
            }
            self.refine(a, b, &mut u, &mut v);
        }
        FlowField::new(w, h, u, v)
    }
}

/// Runs `<program> <frame1.png> <frame2.png> <out.flo>` and reads the result.
/// Frames are written as 16-bit gray PNGs scaled by the larger of the two maxima.
#[derive(Clone, Debug)]
pub struct ExternalFlow {
    pub program: PathBuf,
}

impl FlowEstimator for ExternalFlow {
    fn name(&self) -> String {
        format!("external:{}", self.program.display())
    }

    fn estimate(&self, f1: &LuminanceMap, f2: &LuminanceMap) -> Result<FlowField> {
        let (w, h) = check_pair(f1, f2)?;
        let dir = tempfile::tempdir()?;
        let peak = f1.max().max(f2.max()).max(f64::MIN_POSITIVE);
        let mut paths = Vec::new();
        for (i, f) in [f1, f2].into_iter().enumerate() {
            let px: Vec<u16> = f.values().iter().map(|v| ((v / peak) * 65535.0).round().clamp(0.0, 65535.0) as u16).collect();
            let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(w as u32, h as u32, px).expect("size");
            let p = dir.path().join(format!("frame{}.png", i + 1));
            img.save(&p)?;
            paths.push(p);
        }
        let out = dir.path().join("flow.flo");
        let status = Command::new(&self.program)
            .arg(&paths[0])
            .arg(&paths[1])
            .arg(&out)
            .status()
            .map_err(|e| Error::Flow(format!("{}: {e}", self.program.display())))?;
        if !status.success() {
            return Err(Error::Flow(format!("{} exited with {status}", self.program.display())));
        }
        let flow = FlowField::read_flo(&out)?;
        if (flow.width, flow.height) != (w, h) {
            return Err(Error::Flow(format!("external flow is {}x{}, frames are {w}x{h}", flow.width, flow.height)));
        }
        Ok(flow)
    }
}

/// Registry of flow estimators: `builtin`, `zero`, `external:<program>`.
pub fn flow_registry() -> Registry<dyn FlowEstimator> {
    let mut r: Registry<dyn FlowEstimator> = Registry::new("flow estimator");
    r.register("builtin", |arg| {
        no_argument("builtin", arg)?;
        Ok(Box::new(BuiltinFlow::default()))
    })
    .register("zero", |arg| {
        no_argument("zero", arg)?;
        Ok(Box::new(ZeroFlow))
    })
    .register("external", |arg| {
        Ok(Box::new(ExternalFlow { program: PathBuf::from(required_argument("external", arg)?) }))
    });
    r
}
