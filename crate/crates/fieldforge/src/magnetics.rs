//! Magnetostatic engine: exact finite-segment Biot-Savart evaluation, field
//! maps with uniformity statistics, Neumann-formula inductances, and a
//! first-order image-current approximation of the ferrite enclosure.

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ChamberConfig, ConfigError, WindingGeometry};
use crate::geom::{add, cross, dot, norm, point_segment_distance, scale, sub, Segment, Vec3};

/// Vacuum permeability (H/m).
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

/// mu0 / 4 pi, the shared Biot-Savart and Neumann prefactor.
pub const MU0_OVER_4PI: f64 = 1.0e-7;

/// Maximum sub-segment length used by the Neumann midpoint quadrature (m).
const NEUMANN_MAX_PIECE: f64 = 2.0e-3;

#[derive(Debug, Error)]
pub enum MagneticsError {
    #[error("expected {expected} currents for {expected} windings, got {got}")]
    CurrentCountMismatch { expected: usize, got: usize },
    #[error(
        "evaluation point [{0:.4}, {1:.4}, {2:.4}] m lies within the wire radius of coil #{coil_id}",
        point[0], point[1], point[2]
    )]
    SingularPoint { point: Vec3, coil_id: u8 },
    #[error("windings #{a} and #{b} overlap: closest approach {distance:.3e} m is below the wire radius")]
    OverlappingWindings { a: u8, b: u8, distance: f64 },
    #[error("winding #{0} is not a closed loop")]
    OpenLoop(u8),
    #[error("field map holds no usable samples")]
    EmptyMap,
    #[error("{quantity} must be positive, got {value}")]
    NonPositive { quantity: &'static str, value: f64 },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

// ---------------------------------------------------------------------------
// Biot-Savart
// ---------------------------------------------------------------------------

/// Field of one straight segment carrying unit current, exact closed form.
///
/// Returns zero on the segment's line outside the conductor, where the cross
/// product vanishes; points inside the conductor are rejected upstream.
#[inline]
fn segment_unit_field(seg: &Segment, p: Vec3) -> Vec3 {
    let ri = sub(seg.start, p);
    let rf = sub(seg.end, p);
    let ni = norm(ri);
    let nf = norm(rf);
    let denom = ni * nf * (ni * nf + dot(ri, rf));
    if denom <= 0.0 {
        return [0.0; 3];
    }
    scale(cross(ri, rf), MU0_OVER_4PI * (ni + nf) / denom)
}

/// Sum of the unit-current segment fields of a whole winding.
fn winding_unit_field(winding: &WindingGeometry, p: Vec3) -> Vec3 {
    let mut b = [0.0; 3];
    for seg in &winding.segments {
        b = add(b, segment_unit_field(seg, p));
    }
    b
}

/// Reflect a point across the axis-aligned plane `axis = plane`.
#[inline]
fn mirror_point(p: Vec3, axis: usize, plane: f64) -> Vec3 {
    let mut m = p;
    m[axis] = 2.0 * plane - p[axis];
    m
}

/// First-order image-current model of the high-permeability enclosure.
///
/// Each of the six axis-aligned planes reflects every source segment once,
/// with the same current sign (perfect-magnetic-conductor boundary).
/// Reflections of reflections are not taken.
#[derive(Debug, Clone, PartialEq)]
pub struct FerriteImages {
    /// Plane positions of the enclosure interior walls (m).
    pub min: Vec3,
    pub max: Vec3,
    /// Scalar multiplier applied to the total (direct + imaged) field.
    pub calibration: f64,
}

impl FerriteImages {
    /// Enclosure hugging the given windings with `gap` clearance on all sides.
    pub fn enclosing(windings: &[WindingGeometry], gap: f64, calibration: f64) -> Option<Self> {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        let mut any = false;
        for w in windings {
            if let Some((wlo, whi)) = w.bounding_box() {
                any = true;
                for k in 0..3 {
                    lo[k] = lo[k].min(wlo[k]);
                    hi[k] = hi[k].max(whi[k]);
                }
            }
        }
        if !any {
            return None;
        }
        Some(Self {
            min: [lo[0] - gap, lo[1] - gap, lo[2] - gap],
            max: [hi[0] + gap, hi[1] + gap, hi[2] + gap],
            calibration,
        })
    }

    /// Build from a config: the box encloses all windings regardless of which
    /// channel is excited. Returns `None` when the ferrite is disabled.
    pub fn from_config(config: &ChamberConfig) -> Result<Option<Self>, ConfigError> {
        if !config.chamber.ferrite_enabled {
            return Ok(None);
        }
        let geoms = config.winding_geometries()?;
        Ok(Self::enclosing(
            &geoms,
            config.chamber.ferrite_gap,
            config.chamber.ferrite_calibration,
        ))
    }

    fn planes(&self) -> [(usize, f64); 6] {
        [
            (0, self.min[0]),
            (0, self.max[0]),
            (1, self.min[1]),
            (1, self.max[1]),
            (2, self.min[2]),
            (2, self.max[2]),
        ]
    }
}

/// Unit-current field of a winding mirrored across one plane. The segment
/// endpoints are mirrored explicitly, which carries the correct image current
/// orientation without pseudovector bookkeeping.
fn winding_image_unit_field(winding: &WindingGeometry, axis: usize, plane: f64, p: Vec3) -> Vec3 {
    let mut b = [0.0; 3];
    for seg in &winding.segments {
        let img = Segment::new(
            mirror_point(seg.start, axis, plane),
            mirror_point(seg.end, axis, plane),
        );
        b = add(b, segment_unit_field(&img, p));
    }
    b
}

/// Flux density at a point from a set of windings with per-winding currents.
///
/// The segment lists carry every turn explicitly, so each segment contributes
/// at its winding's terminal current. With a ferrite model the six
/// single-reflection images are added and the calibration factor multiplies
/// the total; with `None` the free-space sum is returned untouched.
pub fn field_at_point(
    windings: &[WindingGeometry],
    currents: &[f64],
    point: Vec3,
    ferrite: Option<&FerriteImages>,
) -> Result<Vec3, MagneticsError> {
    if windings.len() != currents.len() {
        return Err(MagneticsError::CurrentCountMismatch {
            expected: windings.len(),
            got: currents.len(),
        });
    }
    for w in windings {
        let r_wire = w.wire.bundle_radius();
        for seg in &w.segments {
            if point_segment_distance(point, seg) <= r_wire {
                return Err(MagneticsError::SingularPoint {
                    point,
                    coil_id: w.coil_id,
                });
            }
        }
    }

    let mut total = [0.0; 3];
    for (w, &current) in windings.iter().zip(currents) {
        let mut b = winding_unit_field(w, point);
        if let Some(images) = ferrite {
            for (axis, plane) in images.planes() {
                b = add(b, winding_image_unit_field(w, axis, plane, point));
            }
        }
        total = add(total, scale(b, current));
    }
    if let Some(images) = ferrite {
        total = scale(total, images.calibration);
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Field maps
// ---------------------------------------------------------------------------

/// Sampled flux density over a regular 3-D grid, stored z-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    /// Location of sample (0, 0, 0) (m).
    pub grid_origin: Vec3,
    pub grid_spacing: Vec3,
    pub dims: [usize; 3],
    /// Flux-density vectors (T), z-fastest; skipped points hold zeros.
    pub samples: Vec<Vec3>,
    /// Per-winding excitation currents (coil id, A).
    pub excitation: Vec<(u8, f64)>,
    /// Flat indices of grid points inside a conductor, excluded from stats.
    pub skipped: Vec<usize>,
}

impl FieldMap {
    #[inline]
    pub fn flat_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.dims[1] + iy) * self.dims[2] + iz
    }

    pub fn point(&self, flat: usize) -> Vec3 {
        let iz = flat % self.dims[2];
        let iy = (flat / self.dims[2]) % self.dims[1];
        let ix = flat / (self.dims[1] * self.dims[2]);
        [
            self.grid_origin[0] + ix as f64 * self.grid_spacing[0],
            self.grid_origin[1] + iy as f64 * self.grid_spacing[1],
            self.grid_origin[2] + iz as f64 * self.grid_spacing[2],
        ]
    }

    /// Field magnitudes at all usable (non-skipped) grid points.
    pub fn usable_magnitudes(&self) -> Vec<f64> {
        self.samples
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.skipped.contains(i))
            .map(|(_, b)| norm(*b))
            .collect()
    }

    /// CSV export: `x_m,y_m,z_m,Bx_T,By_T,Bz_T,Bmag_T`, z-fastest row order,
    /// with uniformity statistics appended as `#` comment lines.
    pub fn to_csv(&self, stats: Option<&UniformityStats>) -> String {
        let mut out = String::with_capacity(self.samples.len() * 96 + 256);
        out.push_str("x_m,y_m,z_m,Bx_T,By_T,Bz_T,Bmag_T\n");
        for (i, b) in self.samples.iter().enumerate() {
            let p = self.point(i);
            out.push_str(&format!(
                "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}\n",
                p[0],
                p[1],
                p[2],
                b[0],
                b[1],
                b[2],
                norm(*b)
            ));
        }
        if let Some(s) = stats {
            out.push_str(&format!(
                "# median_magnitude_T = {:.9e}\n",
                s.median_magnitude
            ));
            out.push_str(&format!("# min_T = {:.9e}\n", s.min));
            out.push_str(&format!("# max_T = {:.9e}\n", s.max));
            out.push_str(&format!("# band_halfwidth = {:.9e}\n", s.band_halfwidth));
            out.push_str(&format!("# band_fraction = {:.9e}\n", s.band_fraction));
        }
        out.push_str(&format!("# skipped_points = {}\n", self.skipped.len()));
        out
    }
}

/// Evaluate a field map over an explicit grid. Grid points that fall inside a
/// conductor are flagged in `skipped` and hold zero samples; they never abort
/// the map. Evaluation is parallel over grid points with a deterministic
/// per-point summation order.
pub fn field_map_over_grid(
    windings: &[WindingGeometry],
    currents: &[f64],
    grid_origin: Vec3,
    grid_spacing: Vec3,
    dims: [usize; 3],
    ferrite: Option<&FerriteImages>,
) -> Result<FieldMap, MagneticsError> {
    if windings.len() != currents.len() {
        return Err(MagneticsError::CurrentCountMismatch {
            expected: windings.len(),
            got: currents.len(),
        });
    }
    let n = dims[0] * dims[1] * dims[2];
    let point_of = |flat: usize| -> Vec3 {
        let iz = flat % dims[2];
        let iy = (flat / dims[2]) % dims[1];
        let ix = flat / (dims[1] * dims[2]);
        [
            grid_origin[0] + ix as f64 * grid_spacing[0],
            grid_origin[1] + iy as f64 * grid_spacing[1],
            grid_origin[2] + iz as f64 * grid_spacing[2],
        ]
    };

    let results: Vec<Result<Vec3, ()>> = (0..n)
        .into_par_iter()
        .map(|flat| {
            let p = point_of(flat);
            field_at_point(windings, currents, p, ferrite).map_err(|_| ())
        })
        .collect();

    let mut samples = vec![[0.0; 3]; n];
    let mut skipped = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(b) => samples[i] = b,
            Err(()) => skipped.push(i),
        }
    }

    Ok(FieldMap {
        grid_origin,
        grid_spacing,
        dims,
        samples,
        excitation: windings
            .iter()
            .zip(currents)
            .map(|(w, &i)| (w.coil_id, i))
            .collect(),
        skipped,
    })
}

/// Map one channel's field over the chamber interior at the given current in
/// both of its windings. Grid points sit at cell centers, strictly inside the
/// inner volume; the ferrite box (when enabled) encloses all windings.
pub fn compute_field_map(
    config: &ChamberConfig,
    channel: u8,
    current: f64,
) -> Result<FieldMap, MagneticsError> {
    if current <= 0.0 {
        return Err(MagneticsError::NonPositive {
            quantity: "current",
            value: current,
        });
    }
    let specs = config.windings_for_channel(channel);
    if specs.is_empty() {
        return Err(ConfigError::UnknownChannel(channel).into());
    }
    let windings: Vec<WindingGeometry> = specs
        .iter()
        .map(|s| s.geometry())
        .collect::<Result<_, _>>()?;
    let currents = vec![current; windings.len()];
    let ferrite = FerriteImages::from_config(config)?;

    let dims = config.chamber.grid_dims();
    let mut spacing = [0.0; 3];
    let mut origin = [0.0; 3];
    for k in 0..3 {
        spacing[k] = config.chamber.inner_dimensions[k] / dims[k] as f64;
        origin[k] = -config.chamber.inner_dimensions[k] / 2.0 + spacing[k] / 2.0;
    }
    field_map_over_grid(
        &windings,
        &currents,
        origin,
        spacing,
        dims,
        ferrite.as_ref(),
    )
}

// ---------------------------------------------------------------------------
// Uniformity statistics
// ---------------------------------------------------------------------------

/// Summary of field-magnitude spread over a map.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct UniformityStats {
    pub median_magnitude: f64,
    pub min: f64,
    pub max: f64,
    /// Fraction of usable samples with | |B| - median | <= band * median.
    pub band_fraction: f64,
    pub band_halfwidth: f64,
}

/// Compute uniformity statistics with the standard median (mean of the two
/// central values for even counts).
pub fn uniformity(map: &FieldMap, band_halfwidth: f64) -> Result<UniformityStats, MagneticsError> {
    let mut mags = map.usable_magnitudes();
    if mags.is_empty() {
        return Err(MagneticsError::EmptyMap);
    }
    mags.sort_by(|a, b| a.total_cmp(b));
    let n = mags.len();
    let median = if n % 2 == 1 {
        mags[n / 2]
    } else {
        0.5 * (mags[n / 2 - 1] + mags[n / 2])
    };
    let tol = band_halfwidth * median;
    let in_band = mags.iter().filter(|&&m| (m - median).abs() <= tol).count();
    Ok(UniformityStats {
        median_magnitude: median,
        min: mags[0],
        max: mags[n - 1],
        band_fraction: in_band as f64 / n as f64,
        band_halfwidth,
    })
}

// ---------------------------------------------------------------------------
// Inductance
// ---------------------------------------------------------------------------

/// Midpoint/direction pairs after subdividing a segment chain so no piece
/// exceeds `max_len`.
fn quadrature_pieces(segments: &[Segment], max_len: f64) -> Vec<(Vec3, Vec3)> {
    let mut pieces = Vec::new();
    for seg in segments {
        let len = seg.length();
        if len == 0.0 {
            continue;
        }
        let n = (len / max_len).ceil().max(1.0) as usize;
        let dl = scale(seg.delta(), 1.0 / n as f64);
        for i in 0..n {
            let mid = add(seg.start, scale(dl, i as f64 + 0.5));
            pieces.push((mid, dl));
        }
    }
    pieces
}

/// Mutual inductance between two distinct windings by Neumann's double line
/// integral over the subdivided segment chains. The chains carry every turn
/// explicitly, so no extra turns factor is applied.
pub fn mutual_inductance(a: &WindingGeometry, b: &WindingGeometry) -> Result<f64, MagneticsError> {
    let pa = quadrature_pieces(&a.segments, NEUMANN_MAX_PIECE);
    let pb = quadrature_pieces(&b.segments, NEUMANN_MAX_PIECE);
    let clearance = a.wire.bundle_radius() + b.wire.bundle_radius();

    let mut sum = 0.0;
    let mut min_d2 = f64::INFINITY;
    for (ma, dla) in &pa {
        for (mb, dlb) in &pb {
            let d2 = dot(sub(*ma, *mb), sub(*ma, *mb));
            min_d2 = min_d2.min(d2);
            sum += dot(*dla, *dlb) / d2.sqrt();
        }
    }
    let min_d = min_d2.sqrt();
    if min_d < clearance {
        return Err(MagneticsError::OverlappingWindings {
            a: a.coil_id,
            b: b.coil_id,
            distance: min_d,
        });
    }
    Ok(MU0_OVER_4PI * sum)
}

/// Self-inductance of a closed winding. The Neumann kernel is smoothed with
/// the bundle radius, 1/sqrt(r^2 + a^2), which regularizes the self-distance
/// and reproduces the thin-loop closed form mu0 R (ln(8R/a) - 2).
pub fn self_inductance(w: &WindingGeometry) -> Result<f64, MagneticsError> {
    if !w.is_closed() {
        return Err(MagneticsError::OpenLoop(w.coil_id));
    }
    let pieces = quadrature_pieces(&w.segments, NEUMANN_MAX_PIECE);
    let a2 = w.wire.bundle_radius().powi(2);
    let mut sum = 0.0;
    for (mi, dli) in &pieces {
        for (mj, dlj) in &pieces {
            let d2 = dot(sub(*mi, *mj), sub(*mi, *mj));
            sum += dot(*dli, *dlj) / (d2 + a2).sqrt();
        }
    }
    Ok(MU0_OVER_4PI * sum)
}

/// Invert the terminal voltage/current ratio at a drive frequency into the
/// self and mutual inductance of a coil-half pair: L = U_self / (omega I),
/// M = U_other / (omega I).
pub fn extract_inductance_vi(
    u_self: f64,
    u_other: f64,
    current: f64,
    omega: f64,
) -> Result<(f64, f64), MagneticsError> {
    if current <= 0.0 {
        return Err(MagneticsError::NonPositive {
            quantity: "current",
            value: current,
        });
    }
    if omega <= 0.0 {
        return Err(MagneticsError::NonPositive {
            quantity: "omega",
            value: omega,
        });
    }
    Ok((u_self / (omega * current), u_other / (omega * current)))
}

/// Symmetric matrix of self (diagonal) and mutual (off-diagonal) inductances
/// for a set of windings.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct InductanceMatrix {
    /// Coil ids, in matrix order.
    pub labels: Vec<u8>,
    /// Row-major n x n values (H).
    pub values: Vec<f64>,
}

impl InductanceMatrix {
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size() + j]
    }

    /// Coupling coefficient k = |M_ij| / sqrt(L_i L_j).
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).abs() / (self.get(i, i) * self.get(j, j)).sqrt()
    }

    /// Cholesky-based positive-definiteness test.
    pub fn is_positive_definite(&self) -> bool {
        let n = self.size();
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return false;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        true
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.size();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Coupling coefficient between two coils of an inductance matrix.
pub fn coupling_coefficient(matrix: &InductanceMatrix, i: usize, j: usize) -> f64 {
    matrix.coupling(i, j)
}

/// Build the full coil inductance matrix from the config geometry, ordered by
/// coil id.
pub fn inductance_matrix(config: &ChamberConfig) -> Result<InductanceMatrix, MagneticsError> {
    let mut geoms = config.winding_geometries()?;
    geoms.sort_by_key(|g| g.coil_id);
    let n = geoms.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = self_inductance(&geoms[i])?;
        for j in (i + 1)..n {
            let m = mutual_inductance(&geoms[i], &geoms[j])?;
            values[i * n + j] = m;
            values[j * n + i] = m;
        }
    }
    Ok(InductanceMatrix {
        labels: geoms.iter().map(|g| g.coil_id).collect(),
        values,
    })
}

/// Geometry-derived coupling coefficient between the two channel equivalent
/// loops. Each channel's halves run synchronously, so the flux linked into
/// one half of the idle channel sums the mutuals from both active halves.
pub fn channel_cross_coupling(config: &ChamberConfig) -> Result<f64, MagneticsError> {
    let matrix = inductance_matrix(config)?;
    let idx = |coil: u8| -> Result<usize, MagneticsError> {
        matrix
            .labels
            .iter()
            .position(|&c| c == coil)
            .ok_or(MagneticsError::Config(ConfigError::UnknownCoil(coil)))
    };
    let ch1: Vec<usize> = config
        .windings_for_channel(1)
        .iter()
        .map(|w| idx(w.coil_id))
        .collect::<Result<_, _>>()?;
    let ch2: Vec<usize> = config
        .windings_for_channel(2)
        .iter()
        .map(|w| idx(w.coil_id))
        .collect::<Result<_, _>>()?;
    if ch1.len() != 2 || ch2.len() != 2 {
        return Err(MagneticsError::Config(ConfigError::UnknownChannel(
            if ch1.len() != 2 { 1 } else { 2 },
        )));
    }
    let m_cross = matrix.get(ch1[0], ch2[0]) + matrix.get(ch1[1], ch2[0]);
    let l_eq1 = matrix.get(ch1[0], ch1[0]) + matrix.get(ch1[0], ch1[1]);
    let l_eq2 = matrix.get(ch2[0], ch2[0]) + matrix.get(ch2[0], ch2[1]);
    Ok(m_cross.abs() / (l_eq1 * l_eq2).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::LitzWireSpec;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn thin_wire() -> LitzWireSpec {
        // 800 strands of 0.1 mm at fill 0.5 -> bundle radius exactly 2 mm.
        LitzWireSpec {
            strand_diameter: 1e-4,
            strand_count: 800,
            parallel_bundles: 1,
            conductor_resistivity: 1.72e-8,
        }
    }

    /// Regular polygon approximating a circle of radius r in the plane
    /// normal to `axis`, centered at `center`, traversed counterclockwise
    /// seen from +axis.
    fn circle_winding(
        coil_id: u8,
        r: f64,
        n: usize,
        center: Vec3,
        axis: usize,
        wire: LitzWireSpec,
    ) -> WindingGeometry {
        let point = |k: usize| -> Vec3 {
            let theta = 2.0 * PI * k as f64 / n as f64;
            let (c, s) = (r * theta.cos(), r * theta.sin());
            let mut p = center;
            match axis {
                0 => {
                    p[1] += c;
                    p[2] += s;
                }
                1 => {
                    p[2] += c;
                    p[0] += s;
                }
                _ => {
                    p[0] += c;
                    p[1] += s;
                }
            }
            p
        };
        let segments = (0..n)
            .map(|k| Segment::new(point(k), point((k + 1) % n)))
            .collect();
        WindingGeometry {
            coil_id,
            segments,
            turns: 1,
            wire,
        }
    }

    /// Complete elliptic integrals (K, E) by the arithmetic-geometric mean,
    /// used as the independent oracle for the coaxial-loop mutual inductance.
    fn ellip_ke(k: f64) -> (f64, f64) {
        let mut a = 1.0;
        let mut g = (1.0 - k * k).sqrt();
        let mut c = k;
        let mut pow2 = 0.5;
        let mut c_acc = pow2 * c * c;
        loop {
            let a_new = 0.5 * (a + g);
            let g_new = (a * g).sqrt();
            c = c * c / (4.0 * a_new);
            pow2 *= 2.0;
            c_acc += pow2 * c * c;
            let done = (a_new - a).abs() <= 1e-15 * a_new;
            a = a_new;
            g = g_new;
            if done {
                break;
            }
        }
        let kk = PI / (2.0 * a);
        (kk, kk * (1.0 - c_acc))
    }

    #[test]
    fn circular_loop_center_matches_analytic() {
        let r = 0.05;
        let loop_w = circle_winding(1, r, 720, [0.0; 3], 2, thin_wire());
        let b = field_at_point(&[loop_w], &[1.0], [0.0; 3], None).unwrap();
        let analytic = MU0 * 1.0 / (2.0 * r); // 1.2566e-5 T
        assert_relative_eq!(b[2], analytic, max_relative = 1e-3);
        assert_relative_eq!(b[2], 1.2566e-5, max_relative = 1e-3);
        assert!(b[0].abs() < 1e-18 && b[1].abs() < 1e-18);
    }

    #[test]
    fn long_straight_segment_matches_infinite_wire() {
        let w = WindingGeometry {
            coil_id: 1,
            segments: vec![Segment::new([-5.0, 0.0, 0.0], [5.0, 0.0, 0.0])],
            turns: 1,
            wire: thin_wire(),
        };
        let b = field_at_point(&[w], &[1.0], [0.0, 0.01, 0.0], None).unwrap();
        assert_relative_eq!(norm(b), 2.000e-5, max_relative = 5e-3);
    }

    #[test]
    fn refinement_is_converged_at_720_segments() {
        let r = 0.05;
        let coarse = circle_winding(1, r, 720, [0.0; 3], 2, thin_wire());
        let fine = circle_winding(1, r, 1440, [0.0; 3], 2, thin_wire());
        let b0 = field_at_point(&[coarse], &[1.0], [0.0; 3], None).unwrap()[2];
        let b1 = field_at_point(&[fine], &[1.0], [0.0; 3], None).unwrap()[2];
        assert!(((b1 - b0) / b0).abs() < 1e-3);
    }

    #[test]
    fn field_is_linear_in_current() {
        let w = circle_winding(1, 0.05, 90, [0.0; 3], 2, thin_wire());
        let b1 =
            field_at_point(std::slice::from_ref(&w), &[1.0], [0.01, 0.0, 0.005], None).unwrap();
        let b2 =
            field_at_point(std::slice::from_ref(&w), &[2.0], [0.01, 0.0, 0.005], None).unwrap();
        for k in 0..3 {
            assert_eq!(b2[k], 2.0 * b1[k]); // exact scaling, bit for bit
        }
    }

    #[test]
    fn superposition_over_windings_holds() {
        let wa = circle_winding(1, 0.05, 90, [0.0; 3], 2, thin_wire());
        let wb = circle_winding(2, 0.08, 90, [0.0, 0.0, 0.04], 2, thin_wire());
        let p = [0.01, -0.02, 0.01];
        let both = field_at_point(&[wa.clone(), wb.clone()], &[1.3, -0.7], p, None).unwrap();
        let a = field_at_point(&[wa], &[1.3], p, None).unwrap();
        let b = field_at_point(&[wb], &[-0.7], p, None).unwrap();
        for k in 0..3 {
            assert_relative_eq!(both[k], a[k] + b[k], max_relative = 1e-12, epsilon = 1e-24);
        }
    }

    #[test]
    fn point_inside_wire_is_singular() {
        let w = circle_winding(1, 0.05, 720, [0.0; 3], 2, thin_wire());
        let err = field_at_point(&[w], &[1.0], [0.05, 0.0, 0.0], None).unwrap_err();
        assert!(matches!(
            err,
            MagneticsError::SingularPoint { coil_id: 1, .. }
        ));
    }

    #[test]
    fn orthogonal_concentric_loops_decouple() {
        let wa = circle_winding(1, 0.05, 360, [0.0; 3], 2, thin_wire());
        let wb = circle_winding(2, 0.08, 360, [0.0; 3], 0, thin_wire());
        let m = mutual_inductance(&wa, &wb).unwrap();
        assert!(m.abs() < 1e-12, "M = {m:e}");
    }

    #[test]
    fn coaxial_loops_match_elliptic_integral_oracle() {
        let (r, d) = (0.1, 0.1);
        let wa = circle_winding(1, r, 720, [0.0; 3], 2, thin_wire());
        let wb = circle_winding(2, r, 720, [0.0, 0.0, d], 2, thin_wire());
        let m = mutual_inductance(&wa, &wb).unwrap();

        let k2: f64 = 4.0 * r * r / (4.0 * r * r + d * d);
        let k = k2.sqrt();
        let (kk, ek) = ellip_ke(k);
        let oracle = MU0 * r * ((2.0 / k - k) * kk - (2.0 / k) * ek);
        assert_relative_eq!(m, oracle, max_relative = 5e-3);
    }

    #[test]
    fn mutual_inductance_is_symmetric() {
        let wa = circle_winding(1, 0.07, 240, [0.0; 3], 2, thin_wire());
        let wb = circle_winding(2, 0.05, 240, [0.01, 0.02, 0.06], 2, thin_wire());
        let mab = mutual_inductance(&wa, &wb).unwrap();
        let mba = mutual_inductance(&wb, &wa).unwrap();
        assert_relative_eq!(mab, mba, max_relative = 1e-12);
    }

    #[test]
    fn overlapping_windings_are_rejected() {
        let wa = circle_winding(1, 0.05, 360, [0.0; 3], 2, thin_wire());
        let wb = circle_winding(2, 0.05, 360, [0.0, 0.0, 1e-4], 2, thin_wire());
        assert!(matches!(
            mutual_inductance(&wa, &wb),
            Err(MagneticsError::OverlappingWindings { .. })
        ));
    }

    #[test]
    fn thin_loop_self_inductance_matches_closed_form() {
        let r = 0.1;
        let w = circle_winding(1, r, 720, [0.0; 3], 2, thin_wire());
        let a = w.wire.bundle_radius();
        assert_relative_eq!(a, 2e-3, max_relative = 1e-12);
        let l = self_inductance(&w).unwrap();
        let oracle = MU0 * r * ((8.0 * r / a).ln() - 2.0);
        assert_relative_eq!(l, oracle, max_relative = 2e-2);
    }

    #[test]
    fn open_loop_self_inductance_is_an_error() {
        let mut w = circle_winding(1, 0.1, 360, [0.0; 3], 2, thin_wire());
        w.segments.pop();
        assert!(matches!(
            self_inductance(&w),
            Err(MagneticsError::OpenLoop(1))
        ));
    }

    #[test]
    fn vi_extraction_recovers_table_values() {
        // Forward-evaluate U = omega L I at 50 kHz, then invert.
        let omega = 2.0 * PI * 50e3;
        let (l, m) = extract_inductance_vi(1.3823, 0.21991, 1.0, omega).unwrap();
        assert_relative_eq!(l, 4.400e-6, max_relative = 1e-4);
        assert_relative_eq!(m, 0.700e-6, max_relative = 1e-4);

        let (l0, _) = extract_inductance_vi(0.0, 0.1, 1.0, omega).unwrap();
        assert_eq!(l0, 0.0);

        // Homogeneity: doubling both voltages and the current changes nothing.
        let (l2, m2) = extract_inductance_vi(2.0 * 1.3823, 2.0 * 0.21991, 2.0, omega).unwrap();
        assert_relative_eq!(l2, l, max_relative = 1e-12);
        assert_relative_eq!(m2, m, max_relative = 1e-12);

        assert!(extract_inductance_vi(1.0, 0.1, 0.0, omega).is_err());
        assert!(extract_inductance_vi(1.0, 0.1, 1.0, 0.0).is_err());
    }

    #[test]
    fn coupling_coefficient_from_table_inductances() {
        let m = InductanceMatrix {
            labels: vec![1, 2],
            values: vec![4.4e-6, 0.7e-6, 0.7e-6, 4.0e-6],
        };
        let k = coupling_coefficient(&m, 0, 1);
        assert_relative_eq!(k, 0.7 / (4.4_f64 * 4.0).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(k, 0.167, max_relative = 2e-3);

        let zero = InductanceMatrix {
            labels: vec![1, 2],
            values: vec![4.4e-6, 0.0, 0.0, 4.0e-6],
        };
        assert_eq!(coupling_coefficient(&zero, 0, 1), 0.0);
    }

    fn synthetic_map(mags: &[f64]) -> FieldMap {
        FieldMap {
            grid_origin: [0.0; 3],
            grid_spacing: [1.0; 3],
            dims: [mags.len(), 1, 1],
            samples: mags.iter().map(|&m| [m, 0.0, 0.0]).collect(),
            excitation: vec![],
            skipped: vec![],
        }
    }

    #[test]
    fn uniformity_of_constant_map_is_one() {
        let stats = uniformity(&synthetic_map(&[2.5; 12]), 0.10).unwrap();
        assert_eq!(stats.band_fraction, 1.0);
        assert_eq!(stats.median_magnitude, 2.5);
        assert_eq!(stats.min, 2.5);
        assert_eq!(stats.max, 2.5);
    }

    #[test]
    fn uniformity_even_count_uses_standard_median() {
        // Hand enumeration: median = (1.0 + 1.1)/2 = 1.05, band = +/-0.105,
        // so only 1.0 and 1.1 fall inside -> 2/4.
        let stats = uniformity(&synthetic_map(&[0.9, 1.0, 1.1, 1.5]), 0.10).unwrap();
        assert_relative_eq!(stats.median_magnitude, 1.05, max_relative = 1e-12);
        assert_relative_eq!(stats.band_fraction, 0.5, max_relative = 1e-12);
        assert_eq!(stats.min, 0.9);
        assert_eq!(stats.max, 1.5);
    }

    #[test]
    fn uniformity_odd_count_band_is_inclusive() {
        // Exact binary fractions keep the band boundary representable.
        let stats = uniformity(&synthetic_map(&[0.75, 1.0, 1.25]), 0.25).unwrap();
        assert_relative_eq!(stats.median_magnitude, 1.0, max_relative = 1e-12);
        assert_eq!(stats.band_fraction, 1.0);
    }

    #[test]
    fn uniformity_of_empty_map_errors() {
        let map = synthetic_map(&[]);
        assert!(matches!(
            uniformity(&map, 0.1),
            Err(MagneticsError::EmptyMap)
        ));
    }

    #[test]
    fn far_field_of_long_wire_is_near_constant_over_small_grid() {
        // A huge rectangle whose near edge passes 5 m from a 5 cm grid.
        let w = WindingGeometry {
            coil_id: 1,
            segments: vec![
                Segment::new([-100.0, 5.0, 0.0], [100.0, 5.0, 0.0]),
                Segment::new([100.0, 5.0, 0.0], [100.0, 205.0, 0.0]),
                Segment::new([100.0, 205.0, 0.0], [-100.0, 205.0, 0.0]),
                Segment::new([-100.0, 205.0, 0.0], [-100.0, 5.0, 0.0]),
            ],
            turns: 1,
            wire: thin_wire(),
        };
        let map = field_map_over_grid(
            &[w],
            &[1.0],
            [-0.025, -0.025, -0.025],
            [0.01, 0.01, 0.01],
            [5, 5, 5],
            None,
        )
        .unwrap();
        let stats = uniformity(&map, 0.10).unwrap();
        assert!(stats.max / stats.min < 1.01);
        assert_eq!(stats.band_fraction, 1.0);
    }

    #[test]
    fn doubling_current_doubles_every_map_sample_exactly() {
        let w = circle_winding(1, 0.5, 90, [0.0, 0.0, 0.3], 2, thin_wire());
        let origin = [-0.02, -0.02, -0.02];
        let spacing = [0.02, 0.02, 0.02];
        let dims = [3, 3, 3];
        let m1 = field_map_over_grid(
            std::slice::from_ref(&w),
            &[1.0],
            origin,
            spacing,
            dims,
            None,
        )
        .unwrap();
        let m2 = field_map_over_grid(
            std::slice::from_ref(&w),
            &[2.0],
            origin,
            spacing,
            dims,
            None,
        )
        .unwrap();
        for (a, b) in m1.samples.iter().zip(&m2.samples) {
            for k in 0..3 {
                assert_eq!(b[k], 2.0 * a[k]);
            }
        }
    }

    #[test]
    fn grid_points_inside_conductor_are_flagged_not_fatal() {
        // Wire passes straight through the middle of the grid.
        let w = WindingGeometry {
            coil_id: 1,
            segments: vec![Segment::new([-1.0, 0.0, 0.0], [1.0, 0.0, 0.0])],
            turns: 1,
            wire: thin_wire(),
        };
        let map = field_map_over_grid(
            &[w],
            &[1.0],
            [-0.01, -0.004, 0.0],
            [0.01, 0.004, 1.0],
            [3, 3, 1],
            None,
        )
        .unwrap();
        // The y = 0 row sits inside the 2 mm bundle radius.
        assert_eq!(map.skipped.len(), 3);
        assert!(map.samples.iter().all(|b| b.iter().all(|c| c.is_finite())));
        // Skipped points are excluded from the statistics.
        let stats = uniformity(&map, 0.1).unwrap();
        assert!(stats.min > 0.0);
    }

    #[test]
    fn ferrite_images_boost_interior_field() {
        let w = circle_winding(1, 0.05, 180, [0.0; 3], 2, thin_wire());
        let free = field_at_point(std::slice::from_ref(&w), &[1.0], [0.0; 3], None).unwrap();
        let images = FerriteImages::enclosing(std::slice::from_ref(&w), 0.01, 1.0).unwrap();
        let shielded =
            field_at_point(std::slice::from_ref(&w), &[1.0], [0.0; 3], Some(&images)).unwrap();
        assert!(shielded[2] > free[2]);
        // Same-sign images along the loop axis roughly double the axial field;
        // side-wall images add less. Sanity-bound the boost factor.
        assert!(shielded[2] / free[2] < 4.0);
    }

    #[test]
    fn csv_export_shape_and_comments() {
        let map = synthetic_map(&[1.0, 2.0]);
        let stats = uniformity(&map, 0.1).unwrap();
        let csv = map.to_csv(Some(&stats));
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "x_m,y_m,z_m,Bx_T,By_T,Bz_T,Bmag_T");
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count() - 1, 2);
        assert!(csv.lines().any(|l| l.starts_with("# band_fraction")));
    }
}
