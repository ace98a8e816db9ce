//! Test-side oracles and scene builders, independent of the library's own
//! implementations.
#![allow(dead_code)]

use std::collections::HashMap;

use pathcnn_core::minpath::GridGraph;
use pathcnn_core::pathgeom::Polyline;
use pathcnn_core::raster::{sample_bilinear, PixelCoord, RasterImage, SubPixelPoint};
use rand::Rng;

/// Antialiased flat ridge cross-section.
pub fn bar_profile(d: f64, width: f64) -> f64 {
    (width / 2.0 + 0.5 - d).clamp(0.0, 1.0)
}

pub fn segment_distance(p: SubPixelPoint, a: SubPixelPoint, b: SubPixelPoint) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    (p.x - a.x - t * dx).hypot(p.y - a.y - t * dy)
}

pub fn polyline_distance(p: SubPixelPoint, line: &[SubPixelPoint]) -> f64 {
    if line.len() == 1 {
        return p.distance(line[0]);
    }
    line.windows(2)
        .map(|s| segment_distance(p, s[0], s[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Bright ridge of `width` along `line` on a dark background.
pub fn ridge_image(w: usize, h: usize, line: &[SubPixelPoint], width: f64, bg: f64, contrast: f64) -> RasterImage {
    RasterImage::from_fn(w, h, |x, y| {
        let d = polyline_distance(SubPixelPoint::new(x as f64, y as f64), line);
        bg + contrast * bar_profile(d, width)
    })
}

pub fn pts(xy: &[(f64, f64)]) -> Vec<SubPixelPoint> {
    xy.iter().map(|&(x, y)| SubPixelPoint::new(x, y)).collect()
}

/// Rotates `p` counter-clockwise on screen (x right, y down) by `deg` about `c`.
pub fn rotate_point(p: SubPixelPoint, deg: f64, c: SubPixelPoint) -> SubPixelPoint {
    let (s, co) = deg.to_radians().sin_cos();
    let (dx, dy) = (p.x - c.x, p.y - c.y);
    SubPixelPoint::new(c.x + co * dx + s * dy, c.y - s * dx + co * dy)
}

/// Image whose content is `img` rotated like [`rotate_point`].
pub fn rotate_image(img: &RasterImage, deg: f64, c: SubPixelPoint) -> RasterImage {
    RasterImage::from_fn(img.width(), img.height(), |x, y| {
        let src = rotate_point(SubPixelPoint::new(x as f64, y as f64), -deg, c);
        sample_bilinear(img, src)
    })
}

pub fn rotate_polyline(line: &Polyline, deg: f64, c: SubPixelPoint) -> Polyline {
    line.map(|p| rotate_point(p, deg, c))
}

/// Symmetric random weights on every grid edge, keyed by the ordered pair
/// of vertex indices.
pub fn random_edge_weights(graph: &GridGraph, rng: &mut impl Rng, lo: f64, hi: f64) -> HashMap<(usize, usize), f64> {
    let mut out = HashMap::new();
    for i in 0..graph.vertex_count() {
        let u = graph.coord(i);
        for v in graph.neighbors(u) {
            let j = graph.index(v);
            if j > i {
                out.insert((i, j), rng.gen_range(lo..=hi));
            }
        }
    }
    out
}

pub fn edge_key(graph: &GridGraph, u: PixelCoord, v: PixelCoord) -> (usize, usize) {
    let (a, b) = (graph.index(u), graph.index(v));
    (a.min(b), a.max(b))
}

/// Single-source distances by repeated relaxation of every directed edge.
pub fn bellman_ford(graph: &GridGraph, start: PixelCoord, w: impl Fn(PixelCoord, PixelCoord) -> f64) -> Vec<f64> {
    let n = graph.vertex_count();
    let mut dist = vec![f64::INFINITY; n];
    dist[graph.index(start)] = 0.0;
    for _ in 0..n {
        let mut changed = false;
        for i in 0..n {
            if dist[i].is_infinite() {
                continue;
            }
            let u = graph.coord(i);
            for v in graph.neighbors(u) {
                let j = graph.index(v);
                let cand = dist[i] + w(u, v);
                if cand < dist[j] {
                    dist[j] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

/// Cheapest simple path from `s` to `t` by exhaustive depth-first enumeration.
pub fn exhaustive_min_path(
    graph: &GridGraph,
    s: PixelCoord,
    t: PixelCoord,
    w: &dyn Fn(PixelCoord, PixelCoord) -> f64,
) -> f64 {
    fn go(
        graph: &GridGraph,
        u: PixelCoord,
        t: PixelCoord,
        acc: f64,
        seen: &mut Vec<bool>,
        w: &dyn Fn(PixelCoord, PixelCoord) -> f64,
        best: &mut f64,
    ) {
        if u == t {
            *best = best.min(acc);
            return;
        }
        let nbrs: Vec<PixelCoord> = graph.neighbors(u).collect();
        for v in nbrs {
            let j = graph.index(v);
            if !seen[j] {
                seen[j] = true;
                go(graph, v, t, acc + w(u, v), seen, w, best);
                seen[j] = false;
            }
        }
    }
    let mut seen = vec![false; graph.vertex_count()];
    seen[graph.index(s)] = true;
    let mut best = f64::INFINITY;
    go(graph, s, t, 0.0, &mut seen, w, &mut best);
    best
}

pub fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Records every weight an inner adapter returns.
pub struct Recording<A> {
    pub inner: A,
    pub calls: Vec<(PixelCoord, PixelCoord, f64)>,
}

impl<A> Recording<A> {
    pub fn new(inner: A) -> Self {
        Self { inner, calls: Vec::new() }
    }
}

impl<A: pathcnn_core::minpath::EdgeAdapter> pathcnn_core::minpath::EdgeAdapter for Recording<A> {
    fn adapt(
        &mut self,
        u: PixelCoord,
        v: PixelCoord,
        base: f64,
        state: &pathcnn_core::minpath::SearchState,
        img: &RasterImage,
    ) -> pathcnn_core::Result<f64> {
        let w = self.inner.adapt(u, v, base, state, img)?;
        self.calls.push((u, v, w));
        Ok(w)
    }
}

/// The worked search step: `u` settled at distance 10 with tentative
/// neighbors `v1` (20) and `v2` (12), edge weights 5 and 8.
pub struct WorkedStep {
    pub state: pathcnn_core::minpath::SearchState,
    pub s: PixelCoord,
    pub u: PixelCoord,
    pub v1: PixelCoord,
    pub v2: PixelCoord,
    pub img: RasterImage,
}

impl WorkedStep {
    pub fn new() -> Self {
        use pathcnn_core::minpath::{Connectivity, SearchState};
        // s u v2
        // . v1 .
        let graph = GridGraph::new(3, 2, Connectivity::Four);
        let (s, u) = (PixelCoord::new(0, 0), PixelCoord::new(1, 0));
        let (v1, v2) = (PixelCoord::new(1, 1), PixelCoord::new(2, 0));
        let mut state = SearchState::new(graph, s).unwrap();
        assert_eq!(state.settle_next(), Some(s));
        state.set_tentative(u, 10.0, Some(s), 10.0);
        state.set_tentative(v1, 20.0, Some(PixelCoord::new(0, 1)), 20.0);
        state.set_tentative(v2, 12.0, Some(s), 12.0);
        assert_eq!(state.settle_next(), Some(u));
        Self {
            state,
            s,
            u,
            v1,
            v2,
            img: RasterImage::new(3, 2, 1),
        }
    }

    pub fn weight(&self) -> impl Fn(PixelCoord, PixelCoord) -> f64 {
        let (u, v1, v2) = (self.u, self.v1, self.v2);
        move |a, b| {
            let pair = |x, y| (a == x && b == y) || (a == y && b == x);
            if pair(u, v1) {
                5.0
            } else if pair(u, v2) {
                8.0
            } else {
                1.0
            }
        }
    }
}

/// Smooth test scene: a curved Gaussian-profile ridge over slowly varying shading.
pub fn smooth_ridge_scene(size: usize) -> RasterImage {
    let c = size as f64 / 2.0;
    let ridge: Vec<SubPixelPoint> = (0..=200)
        .map(|i| {
            let t = i as f64 / 200.0;
            let x = c - 0.4 * size as f64 + 0.8 * size as f64 * t;
            SubPixelPoint::new(x, c + 0.12 * size as f64 * (t * std::f64::consts::PI * 2.0).sin())
        })
        .collect();
    RasterImage::from_fn(size, size, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        let shade = 0.15 + 0.05 * (0.05 * fx + 0.03 * fy).sin() + 0.05 * (0.04 * fy - 0.02 * fx).cos();
        let d = polyline_distance(SubPixelPoint::new(fx, fy), &ridge);
        shade + 0.6 * (-d * d / (2.0 * 2.5 * 2.5)).exp()
    })
}

/// Circular arc of arc length `len` starting at `p0` in direction `theta`
/// with curvature `k`, sampled every 0.5 px.
pub fn arc(p0: SubPixelPoint, theta: f64, k: f64, len: f64) -> Polyline {
    let n = (len / 0.5).ceil() as usize;
    let mut points = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let s = len * i as f64 / n as f64;
        let p = if k.abs() < 1e-9 {
            SubPixelPoint::new(p0.x + s * theta.cos(), p0.y + s * theta.sin())
        } else {
            let a = theta + k * s;
            SubPixelPoint::new(p0.x + (a.sin() - theta.sin()) / k, p0.y - (a.cos() - theta.cos()) / k)
        };
        points.push(p);
    }
    Polyline::new(points).unwrap()
}
