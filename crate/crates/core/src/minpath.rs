//! Pixel-grid graph, tubularity-based initial edge weights, and Dijkstra's
//! algorithm with a hook that may raise edge weights while the search runs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pathgeom::Polyline;
use crate::raster::{PixelCoord, RasterImage};
use crate::tubularity::TubularityMap;

/// Neighborhood of a pixel vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    pub fn from_count(n: u8) -> Result<Self> {
        match n {
            4 => Ok(Self::Four),
            8 => Ok(Self::Eight),
            _ => Err(Error::InvalidParameter(format!("connectivity must be 4 or 8, got {n}"))),
        }
    }

    fn offsets(self) -> &'static [(i64, i64)] {
        const FOUR: [(i64, i64); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];
        const EIGHT: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
        match self {
            Self::Four => &FOUR,
            Self::Eight => &EIGHT,
        }
    }
}

/// Implicit graph whose vertices are the pixels of a `width`x`height` image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridGraph {
    pub width: usize,
    pub height: usize,
    pub connectivity: Connectivity,
}

impl GridGraph {
    pub fn new(width: usize, height: usize, connectivity: Connectivity) -> Self {
        Self {
            width,
            height,
            connectivity,
        }
    }

    pub fn for_image(img: &RasterImage, connectivity: Connectivity) -> Self {
        Self::new(img.width(), img.height(), connectivity)
    }

    pub fn vertex_count(&self) -> usize {
        self.width * self.height
    }

    pub fn contains(&self, p: PixelCoord) -> bool {
        p.x < self.width && p.y < self.height
    }

    #[inline]
    pub fn index(&self, p: PixelCoord) -> usize {
        p.y * self.width + p.x
    }

    #[inline]
    pub fn coord(&self, index: usize) -> PixelCoord {
        PixelCoord::new(index % self.width, index / self.width)
    }

    pub fn check(&self, p: PixelCoord) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                x: p.x as i64,
                y: p.y as i64,
                width: self.width,
                height: self.height,
            })
        }
    }

    pub fn neighbors(&self, p: PixelCoord) -> impl Iterator<Item = PixelCoord> + '_ {
        let (w, h) = (self.width as i64, self.height as i64);
        self.connectivity.offsets().iter().filter_map(move |&(dx, dy)| {
            let (x, y) = (p.x as i64 + dx, p.y as i64 + dy);
            (x >= 0 && y >= 0 && x < w && y < h).then(|| PixelCoord::new(x as usize, y as usize))
        })
    }

    /// Euclidean length of the edge between two neighbors: 1 or √2.
    pub fn edge_length(u: PixelCoord, v: PixelCoord) -> f64 {
        if u.x != v.x && u.y != v.y {
            std::f64::consts::SQRT_2
        } else {
            1.0
        }
    }

    /// Every undirected edge once.
    pub fn edges(&self) -> impl Iterator<Item = (PixelCoord, PixelCoord)> + '_ {
        (0..self.vertex_count()).flat_map(move |i| {
            let u = self.coord(i);
            self.neighbors(u)
                .filter(move |v| self.index(*v) > i)
                .map(move |v| (u, v))
        })
    }
}

/// Static, positive weight of every edge before any adaptation.
pub trait EdgeWeights {
    fn weight(&self, u: PixelCoord, v: PixelCoord) -> f64;
}

/// `w0[e] = 1 / (V(e) + ε) + λ·l(e)`, with `V(e)` the mean tubularity of the
/// edge's two endpoint pixels.
#[derive(Debug, Clone)]
pub struct InitialWeights<'a> {
    pub tubularity: &'a TubularityMap,
    pub epsilon: f64,
    pub lambda: f64,
}

impl<'a> InitialWeights<'a> {
    pub fn new(tubularity: &'a TubularityMap, epsilon: f64, lambda: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be > 0, got {epsilon}")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(Self {
            tubularity,
            epsilon,
            lambda,
        })
    }

    /// Median of `w0` over all edges of `graph`.
    pub fn median(&self, graph: &GridGraph) -> f64 {
        let mut all: Vec<f64> = graph.edges().map(|(u, v)| self.weight(u, v)).collect();
        if all.is_empty() {
            return 1.0 / self.epsilon;
        }
        let mid = all.len() / 2;
        let (_, m, _) = all.select_nth_unstable_by(mid, f64::total_cmp);
        *m
    }
}

/// `1 / (V + ε) + λ·l`.
pub fn initial_weight(tubularity: f64, length: f64, epsilon: f64, lambda: f64) -> f64 {
    1.0 / (tubularity + epsilon) + lambda * length
}

impl EdgeWeights for InitialWeights<'_> {
    #[inline]
    fn weight(&self, u: PixelCoord, v: PixelCoord) -> f64 {
        let tub = 0.5 * (self.tubularity.get(u.x, u.y) + self.tubularity.get(v.x, v.y));
        initial_weight(tub, GridGraph::edge_length(u, v), self.epsilon, self.lambda)
    }
}

impl<F: Fn(PixelCoord, PixelCoord) -> f64> EdgeWeights for F {
    fn weight(&self, u: PixelCoord, v: PixelCoord) -> f64 {
        self(u, v)
    }
}

/// Hook consulted each time the search examines an edge out of the vertex
/// being settled. Returned weights must be `>= base`.
pub trait EdgeAdapter {
    fn adapt(
        &mut self,
        u: PixelCoord,
        v: PixelCoord,
        base: f64,
        state: &SearchState,
        img: &RasterImage,
    ) -> Result<f64>;
}

/// Leaves every weight at its initial value (classical Dijkstra).
#[derive(Debug, Default, Clone, Copy)]
pub struct IdentityAdapter;

impl EdgeAdapter for IdentityAdapter {
    #[inline]
    fn adapt(&mut self, _: PixelCoord, _: PixelCoord, base: f64, _: &SearchState, _: &RasterImage) -> Result<f64> {
        Ok(base)
    }
}

impl<A: EdgeAdapter + ?Sized> EdgeAdapter for &mut A {
    fn adapt(
        &mut self,
        u: PixelCoord,
        v: PixelCoord,
        base: f64,
        state: &SearchState,
        img: &RasterImage,
    ) -> Result<f64> {
        (**self).adapt(u, v, base, state, img)
    }
}

const NO_PRED: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct FrontierEntry {
    dist: f64,
    index: u32,
}

impl PartialEq for FrontierEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for FrontierEntry {}

impl PartialOrd for FrontierEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FrontierEntry {
    // Reversed: `BinaryHeap` is a max-heap. Ties go to the smaller row-major
    // index, i.e. lexicographic (y, x).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Distances, predecessors and the settled set of one search.
#[derive(Debug, Clone)]
pub struct SearchState {
    graph: GridGraph,
    start: PixelCoord,
    dist: Vec<f64>,
    pred: Vec<u32>,
    /// Adapted weight of the edge `pred -> v` at the time `dist[v]` was set.
    pred_weight: Vec<f64>,
    settled: Vec<bool>,
    settled_count: usize,
    frontier: BinaryHeap<FrontierEntry>,
}

impl SearchState {
    /// Fresh state with `d(start) = 0` and every other vertex at infinity.
    pub fn new(graph: GridGraph, start: PixelCoord) -> Result<Self> {
        graph.check(start)?;
        let n = graph.vertex_count();
        if n >= NO_PRED as usize {
            return Err(Error::InvalidParameter("image too large for the search".into()));
        }
        let mut state = Self {
            graph,
            start,
            dist: vec![f64::INFINITY; n],
            pred: vec![NO_PRED; n],
            pred_weight: vec![0.0; n],
            settled: vec![false; n],
            settled_count: 0,
            frontier: BinaryHeap::new(),
        };
        let s = graph.index(start);
        state.dist[s] = 0.0;
        state.frontier.push(FrontierEntry { dist: 0.0, index: s as u32 });
        Ok(state)
    }

    pub fn graph(&self) -> &GridGraph {
        &self.graph
    }

    pub fn start(&self) -> PixelCoord {
        self.start
    }

    pub fn dist(&self, p: PixelCoord) -> f64 {
        self.dist[self.graph.index(p)]
    }

    pub fn pred(&self, p: PixelCoord) -> Option<PixelCoord> {
        match self.pred[self.graph.index(p)] {
            NO_PRED => None,
            i => Some(self.graph.coord(i as usize)),
        }
    }

    /// Weight that was used for the edge `pred(p) -> p` when `d(p)` was last lowered.
    pub fn pred_weight(&self, p: PixelCoord) -> f64 {
        self.pred_weight[self.graph.index(p)]
    }

    pub fn is_settled(&self, p: PixelCoord) -> bool {
        self.settled[self.graph.index(p)]
    }

    pub fn settled_count(&self) -> usize {
        self.settled_count
    }

    /// Sets a tentative distance and predecessor, as if an earlier relaxation
    /// had produced them. Used to stage a search mid-run.
    pub fn set_tentative(&mut self, v: PixelCoord, dist: f64, pred: Option<PixelCoord>, weight: f64) {
        let i = self.graph.index(v);
        self.dist[i] = dist;
        self.pred[i] = pred.map_or(NO_PRED, |p| self.graph.index(p) as u32);
        self.pred_weight[i] = weight;
        self.frontier.push(FrontierEntry { dist, index: i as u32 });
    }

    /// Marks `u` settled without expanding it.
    pub fn mark_settled(&mut self, u: PixelCoord) {
        let i = self.graph.index(u);
        if !self.settled[i] {
            self.settled[i] = true;
            self.settled_count += 1;
        }
    }

    /// Removes and returns the unsettled vertex with the smallest distance,
    /// marking it settled. Stale heap entries are skipped.
    pub fn settle_next(&mut self) -> Option<PixelCoord> {
        while let Some(entry) = self.frontier.pop() {
            let i = entry.index as usize;
            if self.settled[i] || entry.dist > self.dist[i] {
                continue;
            }
            self.settled[i] = true;
            self.settled_count += 1;
            return Some(self.graph.coord(i));
        }
        None
    }

    /// One inner-loop pass: for every unsettled neighbor `v` of `u`, ask the
    /// adapter for the edge weight and relax `d(v)` if it improves.
    pub fn expand<W, A>(&mut self, u: PixelCoord, weights: &W, adapter: &mut A, img: &RasterImage) -> Result<()>
    where
        W: EdgeWeights + ?Sized,
        A: EdgeAdapter + ?Sized,
    {
        let graph = self.graph;
        let du = self.dist(u);
        let ui = graph.index(u) as u32;
        for v in graph.neighbors(u) {
            let vi = graph.index(v);
            if self.settled[vi] {
                continue;
            }
            let base = weights.weight(u, v);
            let w = adapter.adapt(u, v, base, self, img)?;
            let candidate = du + w;
            if self.dist[vi] > candidate {
                self.dist[vi] = candidate;
                self.pred[vi] = ui;
                self.pred_weight[vi] = w;
                self.frontier.push(FrontierEntry {
                    dist: candidate,
                    index: vi as u32,
                });
            }
        }
        Ok(())
    }
}

/// Stopping rule for [`dijkstra_until`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    /// Stop once this vertex is settled.
    AtEnd(PixelCoord),
    /// Run until the frontier is empty or `max_settled` vertices are settled.
    Exhaust { max_settled: Option<usize> },
}

/// Dijkstra's algorithm with per-edge adaptation. With `end = Some(e)` it
/// stops as soon as `e` is settled; with `None` it runs until every reachable
/// vertex is settled.
pub fn dijkstra<W, A>(
    graph: &GridGraph,
    start: PixelCoord,
    end: Option<PixelCoord>,
    weights: &W,
    adapter: &mut A,
    img: &RasterImage,
) -> Result<SearchState>
where
    W: EdgeWeights + ?Sized,
    A: EdgeAdapter + ?Sized,
{
    let stop = match end {
        Some(e) => Stop::AtEnd(e),
        None => Stop::Exhaust { max_settled: None },
    };
    dijkstra_until(graph, start, stop, weights, adapter, img)
}

pub fn dijkstra_until<W, A>(
    graph: &GridGraph,
    start: PixelCoord,
    stop: Stop,
    weights: &W,
    adapter: &mut A,
    img: &RasterImage,
) -> Result<SearchState>
where
    W: EdgeWeights + ?Sized,
    A: EdgeAdapter + ?Sized,
{
    let mut state = SearchState::new(*graph, start)?;
    if let Stop::AtEnd(end) = stop {
        graph.check(end)?;
    }
    loop {
        match stop {
            Stop::AtEnd(end) if state.is_settled(end) => break,
            Stop::Exhaust { max_settled: Some(max) } if state.settled_count() >= max => break,
            _ => {}
        }
        let Some(u) = state.settle_next() else {
            if let Stop::AtEnd(end) = stop {
                return Err(Error::Unreachable { x: end.x, y: end.y });
            }
            break;
        };
        state.expand(u, weights, adapter, img)?;
    }
    Ok(state)
}

/// Follows predecessors from `end` back to the start; the result runs start → end.
pub fn extract_path(state: &SearchState, end: PixelCoord) -> Result<Polyline> {
    let vertices = extract_vertices(state, end)?;
    Ok(Polyline::from_pixels(&vertices))
}

pub fn extract_vertices(state: &SearchState, end: PixelCoord) -> Result<Vec<PixelCoord>> {
    state.graph().check(end)?;
    if !state.is_settled(end) {
        return Err(Error::NotSettled { x: end.x, y: end.y });
    }
    let mut out = vec![end];
    let mut cur = end;
    while let Some(p) = state.pred(cur) {
        out.push(p);
        cur = p;
        if out.len() > state.graph().vertex_count() {
            return Err(Error::DegeneratePath("predecessor cycle".into()));
        }
    }
    out.reverse();
    Ok(out)
}

/// Sum of the settlement-time edge weights along a vertex path.
pub fn path_weight(state: &SearchState, vertices: &[PixelCoord]) -> f64 {
    vertices.iter().skip(1).fold(0.0, |acc, &v| acc + state.pred_weight(v))
}
