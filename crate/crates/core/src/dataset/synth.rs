//! Procedural ridge scenes with built-in short-cut traps.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::mean_distance;
use crate::pathcnn::{run_plain, SearchParams};
use crate::pathgeom::{resample_by_arclength, Polyline};
use crate::raster::{BinaryMap, PixelCoord, RasterImage, SubPixelPoint};
use crate::tubularity::{vesselness, TubularityMap, TubularityParams};

use super::Annotation;

const BACKGROUND: f64 = 0.1;
const MAX_ATTEMPTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrapType {
    /// A single curved ridge.
    None,
    /// Long detour ridge plus a faint straight corridor between its ends.
    Type1,
    /// Curved ridge plus a straight decoy with a different texture.
    Type2,
}

impl std::str::FromStr for TrapType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(TrapType::None),
            "type1" => Ok(TrapType::Type1),
            "type2" => Ok(TrapType::Type2),
            other => Err(Error::InvalidParameter(format!(
                "unknown trap type `{other}` (expected none, type1 or type2)"
            ))),
        }
    }
}

impl std::fmt::Display for TrapType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TrapType::None => "none",
            TrapType::Type1 => "type1",
            TrapType::Type2 => "type2",
        })
    }
}

/// Fill pattern of the type-2 decoy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DecoyTexture {
    /// On/off segments along the ridge; peak intensity is scaled by
    /// `1 / duty` so the mean matches a solid ridge.
    Dashed { period: f64, duty: f64 },
    Solid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSpec {
    pub size: usize,
    pub trap_type: TrapType,
    pub ridge_width: f64,
    /// Ridge intensity above the background.
    pub contrast: f64,
    pub decoy_texture: DecoyTexture,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            size: 256,
            trap_type: TrapType::None,
            ridge_width: 7.0,
            contrast: 0.4,
            decoy_texture: DecoyTexture::Dashed { period: 6.0, duty: 0.5 },
            noise_std: 0.03,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.size < 128 {
            return Err(Error::InvalidParameter(format!("scene size must be >= 128, got {}", self.size)));
        }
        if !(self.ridge_width > 0.0 && self.ridge_width < self.size as f64 / 8.0) {
            return Err(Error::InvalidParameter(format!("bad ridge width {}", self.ridge_width)));
        }
        if !(self.contrast > 0.0 && BACKGROUND + self.contrast <= 1.0) {
            return Err(Error::InvalidParameter(format!("contrast must be in (0, 0.9], got {}", self.contrast)));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidParameter("noise_std must be >= 0".into()));
        }
        if let DecoyTexture::Dashed { period, duty } = self.decoy_texture {
            if !(period > 1.0 && duty > 0.0 && duty <= 1.0) {
                return Err(Error::InvalidParameter("dashed decoy needs period > 1 and duty in (0, 1]".into()));
            }
            if BACKGROUND + self.contrast / duty > 1.0 + 1e-12 {
                return Err(Error::InvalidParameter("contrast / duty exceeds the intensity range".into()));
            }
        }
        Ok(())
    }
}

/// Outcome of the generation-time plain-search check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneValidation {
    pub attempts: usize,
    /// Mean distance of the plain minimal path to the ground truth.
    pub plain_error: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub spec: SceneSpec,
    pub image: RasterImage,
    pub gt_centerline: Polyline,
    /// Trap structure, if any (corridor or decoy).
    pub decoy: Option<Polyline>,
    pub start: PixelCoord,
    pub end: PixelCoord,
    pub trap_type: TrapType,
    /// Pixels within `ridge_width / 2` of the ground-truth centerline.
    pub ridge_mask: BinaryMap,
    pub validation: SceneValidation,
}

impl SyntheticScene {
    pub fn annotation(&self, image_name: &str) -> Annotation {
        Annotation {
            image: image_name.to_string(),
            centerlines: vec![self.gt_centerline.clone()],
            mask: None,
        }
    }

    pub fn tubularity(&self) -> Result<TubularityMap> {
        vesselness(&self.image, &TubularityParams::default())
    }
}

struct Geometry {
    gt: Vec<SubPixelPoint>,
    decoy: Option<Vec<SubPixelPoint>>,
}

/// Straight run from `a` to `b` at roughly unit spacing (excluding `b`).
fn push_segment(out: &mut Vec<SubPixelPoint>, a: (f64, f64), b: (f64, f64)) {
    let n = ((b.0 - a.0).hypot(b.1 - a.1)).ceil().max(1.0) as usize;
    for i in 0..n {
        let t = i as f64 / n as f64;
        out.push(SubPixelPoint::new(a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
    }
}

/// Quarter arc around `c` from angle `a0` to `a1` (excluding the end).
fn push_arc(out: &mut Vec<SubPixelPoint>, c: (f64, f64), r: f64, a0: f64, a1: f64) {
    let n = ((a1 - a0).abs() * r).ceil().max(1.0) as usize;
    for i in 0..n {
        let a = a0 + (a1 - a0) * i as f64 / n as f64;
        out.push(SubPixelPoint::new(c.0 + r * a.cos(), c.1 + r * a.sin()));
    }
}

/// Local-frame geometry (origin at the scene center, before rotation).
fn local_geometry(trap: TrapType, scale: f64, strength: usize, rng: &mut ChaCha8Rng) -> Geometry {
    let boost = 1.0 + 0.12 * strength as f64;
    match trap {
        TrapType::None => {
            let half = rng.gen_range(80.0..95.0) * scale;
            let amp = rng.gen_range(12.0..25.0) * scale;
            let phase = rng.gen_range(0.0..PI);
            let n = (2.0 * half).ceil() as usize * 2;
            let gt = (0..=n)
                .map(|i| {
                    let x = -half + 2.0 * half * i as f64 / n as f64;
                    let y = amp * ((PI * x / half) + phase).sin() - amp * phase.sin();
                    SubPixelPoint::new(x, y)
                })
                .collect();
            Geometry { gt, decoy: None }
        }
        TrapType::Type1 => {
            // U-shaped detour: up the left arm, across, down the right arm
            let a = rng.gen_range(52.0..62.0) * scale;
            let depth = (rng.gen_range(140.0..160.0) * boost).min(175.0) * scale;
            let r = 20.0 * scale;
            let y0 = -depth / 2.0;
            let y1 = depth / 2.0;
            let mut gt = Vec::new();
            push_segment(&mut gt, (-a, y0), (-a, y1 - r));
            push_arc(&mut gt, (-a + r, y1 - r), r, PI, PI / 2.0);
            push_segment(&mut gt, (-a + r, y1), (a - r, y1));
            push_arc(&mut gt, (a - r, y1 - r), r, PI / 2.0, 0.0);
            push_segment(&mut gt, (a, y1 - r), (a, y0));
            gt.push(SubPixelPoint::new(a, y0));
            let mut corridor = Vec::new();
            push_segment(&mut corridor, (-a, y0), (a, y0));
            corridor.push(SubPixelPoint::new(a, y0));
            Geometry {
                gt,
                decoy: Some(corridor),
            }
        }
        TrapType::Type2 => {
            let half = rng.gen_range(70.0..80.0) * scale;
            let amp = (rng.gen_range(55.0..65.0) * boost).min(95.0) * scale;
            let n = (2.0 * half).ceil() as usize * 2;
            let gt = (0..=n)
                .map(|i| {
                    let t = i as f64 / n as f64;
                    let x = -half + 2.0 * half * t;
                    SubPixelPoint::new(x, amp * (PI * t).sin() - amp / 2.0)
                })
                .collect();
            let mut decoy = Vec::new();
            push_segment(&mut decoy, (-half, -amp / 2.0), (half, -amp / 2.0));
            decoy.push(SubPixelPoint::new(half, -amp / 2.0));
            Geometry {
                gt,
                decoy: Some(decoy),
            }
        }
    }
}

/// Distance to a polyline and the arc position of the nearest point, for
/// every pixel within `reach` of it.
fn distance_field(width: usize, height: usize, line: &Polyline, reach: f64) -> Vec<Option<(f64, f64)>> {
    let mut field: Vec<Option<(f64, f64)>> = vec![None; width * height];
    let dense = resample_by_arclength(line, 0.25).expect("non-degenerate structure");
    let r = reach.ceil() as i64;
    for (k, p) in dense.points().iter().enumerate() {
        let s = dense.arc_lengths()[k];
        let (cx, cy) = (p.x.round() as i64, p.y.round() as i64);
        for y in (cy - r).max(0)..=(cy + r).min(height as i64 - 1) {
            for x in (cx - r).max(0)..=(cx + r).min(width as i64 - 1) {
                let d = (x as f64 - p.x).hypot(y as f64 - p.y);
                if d > reach {
                    continue;
                }
                let slot = &mut field[y as usize * width + x as usize];
                if slot.map_or(true, |(best, _)| d < best) {
                    *slot = Some((d, s));
                }
            }
        }
    }
    field
}

/// Anti-aliased flat bar profile.
fn bar(d: f64, width: f64) -> f64 {
    (width / 2.0 + 0.5 - d).clamp(0.0, 1.0)
}

fn dash(s: f64, period: f64, duty: f64) -> f64 {
    let on = duty * period;
    let u = s.rem_euclid(period);
    let d = (u - on / 2.0).abs();
    let d = d.min(period - d);
    (on / 2.0 + 0.5 - d).clamp(0.0, 1.0)
}

fn render(
    spec: &SceneSpec,
    gt: &Polyline,
    decoy: Option<&Polyline>,
    rng: &mut ChaCha8Rng,
) -> Result<(RasterImage, BinaryMap)> {
    let n = spec.size;
    let reach = spec.ridge_width / 2.0 + 1.5;
    let mut img = vec![BACKGROUND; n * n];
    let mut mask = BinaryMap::new(n, n);
    let gt_field = distance_field(n, n, gt, reach);
    for (i, f) in gt_field.iter().enumerate() {
        if let Some((d, _)) = f {
            img[i] = img[i].max(BACKGROUND + spec.contrast * bar(*d, spec.ridge_width));
            if *d <= spec.ridge_width / 2.0 {
                mask.set(i % n, i / n, true);
            }
        }
    }
    if let Some(decoy) = decoy {
        let field = distance_field(n, n, decoy, reach);
        for (i, f) in field.iter().enumerate() {
            let Some((d, s)) = *f else { continue };
            let v = match (spec.trap_type, spec.decoy_texture) {
                (TrapType::Type1, _) => 0.5 * spec.contrast * bar(d, spec.ridge_width),
                (_, DecoyTexture::Solid) => spec.contrast * bar(d, spec.ridge_width),
                (_, DecoyTexture::Dashed { period, duty }) => {
                    spec.contrast / duty * bar(d, spec.ridge_width) * dash(s, period, duty)
                }
            };
            img[i] = img[i].max(BACKGROUND + v);
        }
    }
    if spec.noise_std > 0.0 {
        let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        for v in &mut img {
            *v = (*v + noise.sample(rng)).clamp(0.0, 1.0);
        }
    }
    Ok((RasterImage::from_vec(n, n, 1, img)?, mask))
}

/// Generates a scene and checks that plain minimal-path search behaves as
/// intended: it must recover the ridge (no trap) or fall into the trap.
pub fn synth_scene(spec: &SceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.size as f64;
    let scale = n / 256.0;
    let mut last_error = f64::NAN;
    for attempt in 0..MAX_ATTEMPTS {
        let geom = local_geometry(spec.trap_type, scale, attempt, &mut rng);
        let angle = rng.gen_range(0.0..2.0 * PI);
        let (s, c) = angle.sin_cos();
        let center = (
            n / 2.0 + rng.gen_range(-8.0..8.0) * scale,
            n / 2.0 + rng.gen_range(-8.0..8.0) * scale,
        );
        let place = |pts: &[SubPixelPoint]| -> Vec<SubPixelPoint> {
            pts.iter()
                .map(|p| SubPixelPoint::new(center.0 + c * p.x - s * p.y, center.1 + s * p.x + c * p.y))
                .collect()
        };
        let mut gt_pts = place(&geom.gt);
        let margin = spec.ridge_width + 4.0;
        if gt_pts
            .iter()
            .any(|p| p.x < margin || p.y < margin || p.x > n - 1.0 - margin || p.y > n - 1.0 - margin)
        {
            continue;
        }
        let start = gt_pts[0].round_to_pixel(spec.size, spec.size).expect("inside");
        let end = gt_pts.last().unwrap().round_to_pixel(spec.size, spec.size).expect("inside");
        gt_pts[0] = start.to_point();
        *gt_pts.last_mut().unwrap() = end.to_point();
        let gt = Polyline::new(gt_pts)?;
        let decoy = match geom.decoy {
            Some(d) => {
                let mut d = place(&d);
                d[0] = start.to_point();
                *d.last_mut().unwrap() = end.to_point();
                Some(Polyline::new(d)?)
            }
            None => None,
        };
        let (image, ridge_mask) = render(spec, &gt, decoy.as_ref(), &mut rng)?;

        let tub = vesselness(&image, &TubularityParams::default())?;
        let plain = run_plain(start, end, &tub, &SearchParams::default())?;
        let err = mean_distance(&[plain.path], std::slice::from_ref(&gt))?.mean_distance;
        last_error = err;
        let ok = match spec.trap_type {
            TrapType::None => err < 2.0,
            TrapType::Type1 | TrapType::Type2 => err > 10.0,
        };
        if ok {
            return Ok(SyntheticScene {
                spec: *spec,
                image,
                gt_centerline: gt,
                decoy,
                start,
                end,
                trap_type: spec.trap_type,
                ridge_mask,
                validation: SceneValidation {
                    attempts: attempt + 1,
                    plain_error: err,
                },
            });
        }
    }
    Err(Error::TrapValidation {
        attempts: MAX_ATTEMPTS,
        reason: format!(
            "{} scene: plain search error {last_error:.2} px does not match the intended behavior",
            spec.trap_type
        ),
    })
}
