//! Parameter-space pictures: a Gaussian cloud around epoch checkpoints,
//! projected to a PCA plane, interpolated to a contour grid and rendered
//! as SVG. Also the curve chart used by `plot`.

use std::fmt::Write as _;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::candidates::{Candidate, Provenance};
use crate::error::{Error, Result};
use crate::evaluator::Evaluator;
use crate::nn::FlatParams;

pub const VARIANCE_FLOOR: f64 = 1e-12;
pub const PCA_MAX_ITERS: usize = 500;
pub const PCA_TOL: f64 = 1e-10;
pub const IDW_NEIGHBORS: usize = 8;
pub const CONTOUR_LEVELS: usize = 10;

/// Samples from a diagonal Gaussian fitted to `checkpoints`.
pub fn sample_gaussian_cloud<R: Rng + ?Sized>(
    checkpoints: &[FlatParams],
    count: usize,
    rng: &mut R,
) -> Result<Vec<FlatParams>> {
    if checkpoints.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "a Gaussian fit needs at least 2 checkpoints, got {}",
            checkpoints.len()
        )));
    }
    let first = &checkpoints[0];
    if let Some(bad) = checkpoints.iter().find(|c| !c.same_layout(first)) {
        return Err(Error::Dimension {
            context: "checkpoint cloud",
            expected: first.len(),
            actual: bad.len(),
        });
    }
    let n = checkpoints.len() as f64;
    let d = first.len();
    let mut mean = vec![0.0; d];
    for c in checkpoints {
        for (m, v) in mean.iter_mut().zip(c.values()) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; d];
    for c in checkpoints {
        for ((s, v), m) in var.iter_mut().zip(c.values()).zip(&mean) {
            *s += (v - m).powi(2) / n;
        }
    }
    let std: Vec<f64> = var.iter().map(|v| v.max(VARIANCE_FLOOR).sqrt()).collect();
    (0..count)
        .map(|_| {
            let values = mean
                .iter()
                .zip(&std)
                .map(|(m, s)| {
                    let z: f64 = StandardNormal.sample(rng);
                    m + s * z
                })
                .collect();
            first.with_values(values)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    pub mean: Vec<f64>,
    /// Orthonormal, ordered by decreasing explained variance.
    pub directions: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

impl PcaBasis {
    pub fn project(&self, point: &[f64]) -> Vec<f64> {
        self.directions
            .iter()
            .map(|dir| dir.iter().zip(point).zip(&self.mean).map(|((u, x), m)| u * (x - m)).sum())
            .collect()
    }

    pub fn reconstruct(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, dir) in coords.iter().zip(&self.directions) {
            for (o, u) in out.iter_mut().zip(dir) {
                *o += c * u;
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Covariance-vector product without forming the covariance.
fn cov_mul(centered: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let denom = (centered.len() - 1) as f64;
    let mut out = vec![0.0; v.len()];
    for row in centered {
        let s = dot(row, v) / denom;
        for (o, r) in out.iter_mut().zip(row) {
            *o += s * r;
        }
    }
    out
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for u in basis {
        let p = dot(v, u);
        for (x, y) in v.iter_mut().zip(u) {
            *x -= p * y;
        }
    }
}

/// Top-`k` principal directions by power iteration with deflation.
pub fn pca_project(points: &[Vec<f64>], k: usize) -> Result<(PcaBasis, Vec<Vec<f64>>)> {
    if k == 0 || points.len() < k + 1 {
        return Err(Error::InvalidArgument(format!(
            "PCA with k={k} needs at least {} points, got {}",
            k + 1,
            points.len()
        )));
    }
    let d = points[0].len();
    if let Some(bad) = points.iter().find(|p| p.len() != d) {
        return Err(Error::Dimension {
            context: "PCA input",
            expected: d,
            actual: bad.len(),
        });
    }
    if k > d {
        return Err(Error::InvalidArgument(format!("k={k} exceeds dimension {d}")));
    }
    let n = points.len() as f64;
    let mut mean = vec![0.0; d];
    for p in points {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x / n;
        }
    }
    let centered: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let total: f64 = centered.iter().map(|r| dot(r, r)).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("degenerate covariance: all points are equal".into()));
    }
    let trace = total / (n - 1.0);

    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    for _ in 0..k {
        // Start from the sample with the largest residual, which is never
        // orthogonal to the dominant remaining direction.
        let mut v = centered
            .iter()
            .map(|r| {
                let mut r = r.clone();
                orthogonalize(&mut r, &directions);
                r
            })
            .max_by(|a, b| dot(a, a).total_cmp(&dot(b, b)))
            .expect("non-empty");
        if normalize(&mut v) <= total.sqrt() * 1e-12 {
            v = fallback_direction(d, &directions);
        }
        for _ in 0..PCA_MAX_ITERS {
            let mut w = cov_mul(&centered, &v);
            orthogonalize(&mut w, &directions);
            orthogonalize(&mut w, &directions);
            // Nothing left in the residual space: round-off would only
            // steer the iterate back toward earlier directions.
            if normalize(&mut w) <= trace * 1e-12 {
                break;
            }
            let delta: f64 = w.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            v = w;
            if delta < PCA_TOL {
                break;
            }
        }
        orthogonalize(&mut v, &directions);
        orthogonalize(&mut v, &directions);
        normalize(&mut v);
        let lambda = dot(&v, &cov_mul(&centered, &v)).max(0.0);
        directions.push(v);
        variances.push(lambda);
    }

    let basis = PcaBasis {
        mean,
        directions,
        explained_variance: variances,
    };
    let coords = points.iter().map(|p| basis.project(p)).collect();
    Ok((basis, coords))
}

/// A unit vector orthogonal to `basis`, for exhausted residual spaces.
fn fallback_direction(d: usize, basis: &[Vec<f64>]) -> Vec<f64> {
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        orthogonalize(&mut e, basis);
        if normalize(&mut e) > 1e-6 {
            return e;
        }
    }
    unreachable!("k <= d leaves room for another direction")
}

/// Values on a regular grid, row-major with `x` varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<f64>,
}

impl ContourGrid {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.xs.len() + ix]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,value")?;
        for (iy, y) in self.ys.iter().enumerate() {
            for (ix, x) in self.xs.iter().enumerate() {
                writeln!(w, "{x},{y},{}", self.at(ix, iy))?;
            }
        }
        Ok(())
    }

    pub fn value_range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

fn axis(lo: f64, hi: f64, resolution: usize) -> Vec<f64> {
    let (lo, hi) = if hi > lo {
        let margin = 0.05 * (hi - lo);
        (lo - margin, hi + margin)
    } else {
        (lo - 0.5, hi + 0.5)
    };
    let step = (hi - lo) / (resolution - 1) as f64;
    (0..resolution).map(|i| lo + step * i as f64).collect()
}

/// Inverse-distance-weighted value at `(x, y)` from the nearest samples.
pub fn idw(coords: &[[f64; 2]], values: &[f64], x: f64, y: f64) -> f64 {
    let mut by_dist: Vec<(f64, usize)> = coords
        .iter()
        .enumerate()
        .map(|(i, c)| ((c[0] - x).powi(2) + (c[1] - y).powi(2), i))
        .collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    if by_dist[0].0 == 0.0 {
        return values[by_dist[0].1];
    }
    // Offsets from the nearest value keep constant fields exact.
    let base = values[by_dist[0].1];
    let (mut num, mut den) = (0.0, 0.0);
    for &(d2, i) in by_dist.iter().take(IDW_NEIGHBORS) {
        let w = 1.0 / d2;
        num += w * (values[i] - base);
        den += w;
    }
    base + num / den
}

pub fn contour_grid(coords: &[[f64; 2]], values: &[f64], resolution: usize) -> Result<ContourGrid> {
    if coords.is_empty() {
        return Err(Error::Empty("contour samples"));
    }
    if coords.len() != values.len() {
        return Err(Error::Dimension {
            context: "contour values",
            expected: coords.len(),
            actual: values.len(),
        });
    }
    if resolution < 2 {
        return Err(Error::InvalidArgument("grid resolution must be at least 2".into()));
    }
    let bounds = |i: usize| {
        coords
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c[i]), hi.max(c[i])))
    };
    let (x0, x1) = bounds(0);
    let (y0, y1) = bounds(1);
    let xs = axis(x0, x1, resolution);
    let ys = axis(y0, y1, resolution);
    let mut values_out = Vec::with_capacity(resolution * resolution);
    for &y in &ys {
        for &x in &xs {
            values_out.push(idw(coords, values, x, y));
        }
    }
    Ok(ContourGrid {
        xs,
        ys,
        values: values_out,
    })
}

/// `count` evenly spaced interior levels between `lo` and `hi`.
pub fn contour_levels(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (1..=count)
        .map(|k| lo + (hi - lo) * k as f64 / (count + 1) as f64)
        .collect()
}

pub type Segment = [[f64; 2]; 2];

/// Marching squares for one level. Saddles are split using the cell mean.
pub fn marching_squares(grid: &ContourGrid, level: f64) -> Vec<Segment> {
    let (nx, ny) = (grid.xs.len(), grid.ys.len());
    let mut out = Vec::new();
    for iy in 0..ny.saturating_sub(1) {
        for ix in 0..nx.saturating_sub(1) {
            // Corners counter-clockwise from bottom-left.
            let p = [
                [grid.xs[ix], grid.ys[iy]],
                [grid.xs[ix + 1], grid.ys[iy]],
                [grid.xs[ix + 1], grid.ys[iy + 1]],
                [grid.xs[ix], grid.ys[iy + 1]],
            ];
            let v = [
                grid.at(ix, iy),
                grid.at(ix + 1, iy),
                grid.at(ix + 1, iy + 1),
                grid.at(ix, iy + 1),
            ];
            let above: Vec<bool> = v.iter().map(|&x| x >= level).collect();
            let crossing = |e: usize| {
                let (a, b) = (e, (e + 1) % 4);
                let t = (level - v[a]) / (v[b] - v[a]);
                [p[a][0] + t * (p[b][0] - p[a][0]), p[a][1] + t * (p[b][1] - p[a][1])]
            };
            let edges: Vec<usize> = (0..4).filter(|&e| above[e] != above[(e + 1) % 4]).collect();
            match edges.len() {
                2 => out.push([crossing(edges[0]), crossing(edges[1])]),
                4 => {
                    let center_above = v.iter().sum::<f64>() / 4.0 >= level;
                    // Pair each edge with the neighbour that keeps the
                    // centre on its own side.
                    if center_above == above[0] {
                        out.push([crossing(0), crossing(3)]);
                        out.push([crossing(1), crossing(2)]);
                    } else {
                        out.push([crossing(0), crossing(1)]);
                        out.push([crossing(2), crossing(3)]);
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Blue-to-yellow ramp, `t` in `[0, 1]`.
fn color(t: f64) -> String {
    const STOPS: [[f64; 3]; 4] = [
        [68.0, 1.0, 84.0],
        [59.0, 82.0, 139.0],
        [33.0, 145.0, 140.0],
        [253.0, 231.0, 37.0],
    ];
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - i as f64;
    let c: Vec<u8> = (0..3)
        .map(|j| (STOPS[i][j] + f * (STOPS[i + 1][j] - STOPS[i][j])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    width: f64,
    height: f64,
    pad: f64,
}

impl Frame {
    fn sx(&self, x: f64) -> f64 {
        let span = if self.x1 > self.x0 { self.x1 - self.x0 } else { 1.0 };
        self.pad + (x - self.x0) / span * (self.width - 2.0 * self.pad)
    }

    fn sy(&self, y: f64) -> f64 {
        let span = if self.y1 > self.y0 { self.y1 - self.y0 } else { 1.0 };
        self.height - self.pad - (y - self.y0) / span * (self.height - 2.0 * self.pad)
    }
}

/// Heat map plus iso-lines, with checkpoints drawn as black dots and cloud
/// samples as white ones.
pub fn contour_svg(grid: &ContourGrid, anchors: &[[f64; 2]], cloud: &[[f64; 2]]) -> String {
    let frame = Frame {
        x0: grid.xs[0],
        x1: *grid.xs.last().unwrap(),
        y0: grid.ys[0],
        y1: *grid.ys.last().unwrap(),
        width: 640.0,
        height: 640.0,
        pad: 40.0,
    };
    let (lo, hi) = grid.value_range();
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = frame.width,
        h = frame.height
    );
    let (nx, ny) = (grid.xs.len(), grid.ys.len());
    let cw = (frame.sx(grid.xs[nx - 1]) - frame.sx(grid.xs[0])) / (nx - 1) as f64;
    let ch = (frame.sy(grid.ys[0]) - frame.sy(grid.ys[ny - 1])) / (ny - 1) as f64;
    for iy in 0..ny {
        for ix in 0..nx {
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                frame.sx(grid.xs[ix]) - cw / 2.0,
                frame.sy(grid.ys[iy]) - ch / 2.0,
                cw + 0.5,
                ch + 0.5,
                color((grid.at(ix, iy) - lo) / span)
            );
        }
    }
    for level in contour_levels(lo, hi, CONTOUR_LEVELS) {
        let mut d = String::new();
        for [a, b] in marching_squares(grid, level) {
            let _ = write!(
                d,
                "M{:.2} {:.2}L{:.2} {:.2}",
                frame.sx(a[0]),
                frame.sy(a[1]),
                frame.sx(b[0]),
                frame.sy(b[1])
            );
        }
        if !d.is_empty() {
            let _ = writeln!(
                s,
                r#"<path d="{d}" stroke="black" stroke-opacity="0.6" stroke-width="1" fill="none"><title>{level:.3}</title></path>"#
            );
        }
    }
    for c in cloud {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="white" stroke="black" stroke-width="0.5"/>"#,
            frame.sx(c[0]),
            frame.sy(c[1])
        );
    }
    for c in anchors {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="black"/>"#,
            frame.sx(c[0]),
            frame.sy(c[1])
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Everything the `visualize` command writes.
#[derive(Debug, Clone)]
pub struct ContourMap {
    pub basis: PcaBasis,
    pub anchor_coords: Vec<[f64; 2]>,
    pub cloud_coords: Vec<[f64; 2]>,
    pub cloud_returns: Vec<f64>,
    pub grid: ContourGrid,
}

impl ContourMap {
    pub fn svg(&self) -> String {
        contour_svg(&self.grid, &self.anchor_coords, &self.cloud_coords)
    }

    pub fn write_anchors_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,pc1,pc2")?;
        for (i, c) in self.anchor_coords.iter().enumerate() {
            writeln!(w, "{i},{},{}", c[0], c[1])?;
        }
        Ok(())
    }

    pub fn write_cloud_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,pc1,pc2,mean_return")?;
        for (i, (c, r)) in self.cloud_coords.iter().zip(&self.cloud_returns).enumerate() {
            writeln!(w, "{i},{},{},{r}", c[0], c[1])?;
        }
        Ok(())
    }
}

/// Samples `count` policies around `checkpoints`, scores each on `seeds`,
/// and lays everything out on the PCA plane of checkpoints plus samples.
pub fn contour_anchor_map<R: Rng + ?Sized>(
    checkpoints: &[FlatParams],
    count: usize,
    evaluator: &Evaluator,
    seeds: &[u64],
    resolution: usize,
    rng: &mut R,
) -> Result<ContourMap> {
    let cloud = sample_gaussian_cloud(checkpoints, count, rng)?;
    let candidates: Vec<Candidate> = cloud
        .iter()
        .enumerate()
        .map(|(i, p)| Candidate::new(p.clone(), Provenance::Cloud { sample: i }))
        .collect();
    let reports = evaluator.evaluate_all(&candidates, seeds)?;
    let cloud_returns: Vec<f64> = reports.iter().map(|r| r.mean_return).collect();

    let points: Vec<Vec<f64>> = checkpoints
        .iter()
        .chain(&cloud)
        .map(|p| p.values().to_vec())
        .collect();
    let (basis, coords) = pca_project(&points, 2)?;
    let coords: Vec<[f64; 2]> = coords.into_iter().map(|c| [c[0], c[1]]).collect();
    let (anchor_coords, cloud_coords) = coords.split_at(checkpoints.len());
    let grid = contour_grid(cloud_coords, &cloud_returns, resolution)?;
    Ok(ContourMap {
        basis,
        anchor_coords: anchor_coords.to_vec(),
        cloud_coords: cloud_coords.to_vec(),
        cloud_returns,
        grid,
    })
}

/// One line of a curve chart: mean with a ±1 std band.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn line_chart_svg(series: &[Series], x_label: &str, y_label: &str) -> Result<String> {
    let points = series.iter().flat_map(|s| {
        s.x.iter()
            .zip(s.mean.iter().zip(&s.std))
            .map(|(&x, (&m, &sd))| (x, m - sd, m + sd))
    });
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    let mut any = false;
    for (x, lo, hi) in points {
        any = true;
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(lo);
        y1 = y1.max(hi);
    }
    if !any {
        return Err(Error::Empty("chart series"));
    }
    for s in series {
        if s.x.len() != s.mean.len() || s.x.len() != s.std.len() {
            return Err(Error::Dimension {
                context: "chart series",
                expected: s.x.len(),
                actual: s.mean.len().min(s.std.len()),
            });
        }
    }
    let frame = Frame {
        x0,
        x1,
        y0,
        y1,
        width: 800.0,
        height: 480.0,
        pad: 60.0,
    };
    const PALETTE: [&str; 7] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"];
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = frame.width,
        h = frame.height
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (left, bottom) = (frame.pad, frame.height - frame.pad);
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top}L{left} {bottom}L{right} {bottom}" stroke="black" fill="none"/>"#,
        top = frame.pad,
        right = frame.width - frame.pad
    );
    for t in 0..=4 {
        let f = t as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            frame.sx(xv),
            bottom + 18.0,
            tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 6.0,
            frame.sy(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x_label}</text>"#,
        frame.width / 2.0,
        frame.height - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.1}" text-anchor="middle" transform="rotate(-90 15 {:.1})">{y_label}</text>"#,
        frame.height / 2.0,
        frame.height / 2.0
    );
    for (k, ser) in series.iter().enumerate() {
        let c = PALETTE[k % PALETTE.len()];
        let mut band = String::new();
        for (i, (&x, (&m, &sd))) in ser.x.iter().zip(ser.mean.iter().zip(&ser.std)).enumerate() {
            let _ = write!(band, "{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, frame.sx(x), frame.sy(m + sd));
        }
        for (&x, (&m, &sd)) in ser.x.iter().zip(ser.mean.iter().zip(&ser.std)).rev() {
            let _ = write!(band, "L{:.2} {:.2}", frame.sx(x), frame.sy(m - sd));
        }
        let _ = writeln!(s, r#"<path d="{band}Z" fill="{c}" fill-opacity="0.2" stroke="none"/>"#);
        let mut line = String::new();
        for (i, (&x, &m)) in ser.x.iter().zip(&ser.mean).enumerate() {
            let _ = write!(line, "{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, frame.sx(x), frame.sy(m));
        }
        let _ = writeln!(s, r#"<path d="{line}" stroke="{c}" stroke-width="1.5" fill="none"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" fill="{c}">{}</text>"#,
            left + 10.0,
            frame.pad + 16.0 * (k + 1) as f64,
            ser.label
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn tick(v: f64) -> String {
    if v.abs() >= 1e4 {
        format!("{:.0}k", v / 1e3)
    } else if v.abs() >= 10.0 || v == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}
