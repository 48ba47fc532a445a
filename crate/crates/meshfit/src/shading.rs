//! Shape-from-shading refinement: second-order spherical-harmonics lighting
//! estimated from the coarse surface, photometric depth refinement by
//! damped Gauss-Newton, and detail magnification.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::WeakPerspectiveCamera;
use crate::error::{Error, Result};
use crate::maps::ScalarMap;
use crate::sparse::{conjugate_gradient, CsrMatrix, NormalEquations};

/// Second-order real SH normalization constants (orthonormal over the
/// sphere): band 0, band 1, and the three band-2 shapes.
pub const SH_C0: f64 = 0.282_094_791_773_878_14;
pub const SH_C1: f64 = 0.488_602_511_902_919_9;
pub const SH_C2: f64 = 1.092_548_430_592_079_2;
pub const SH_C2_ZZ: f64 = 0.315_391_565_252_520_05;
pub const SH_C2_XXYY: f64 = 0.546_274_215_296_039_6;

/// Evaluate the 9 SH basis functions at a unit normal, in the order
/// `(1, y, z, x, xy, yz, 3z^2-1, xz, x^2-y^2)`.
pub fn sh_basis(normal: &Vector3<f64>) -> Result<[f64; 9]> {
    let len = normal.norm();
    if (len - 1.0).abs() > 1e-6 {
        return Err(Error::NonUnitVector { length: len });
    }
    Ok(sh_basis_unit(normal))
}

pub(crate) fn sh_basis_unit(n: &Vector3<f64>) -> [f64; 9] {
    let (x, y, z) = (n.x, n.y, n.z);
    [
        SH_C0,
        SH_C1 * y,
        SH_C1 * z,
        SH_C1 * x,
        SH_C2 * x * y,
        SH_C2 * y * z,
        SH_C2_ZZ * (3.0 * z * z - 1.0),
        SH_C2 * x * z,
        SH_C2_XXYY * (x * x - y * y),
    ]
}

/// Gradient of each basis function with respect to the (unconstrained)
/// normal components.
fn sh_basis_gradient(n: &Vector3<f64>) -> [Vector3<f64>; 9] {
    let (x, y, z) = (n.x, n.y, n.z);
    [
        Vector3::zeros(),
        Vector3::new(0.0, SH_C1, 0.0),
        Vector3::new(0.0, 0.0, SH_C1),
        Vector3::new(SH_C1, 0.0, 0.0),
        Vector3::new(SH_C2 * y, SH_C2 * x, 0.0),
        Vector3::new(0.0, SH_C2 * z, SH_C2 * y),
        Vector3::new(0.0, 0.0, SH_C2_ZZ * 6.0 * z),
        Vector3::new(SH_C2 * z, 0.0, SH_C2 * x),
        Vector3::new(SH_C2_XXYY * 2.0 * x, -SH_C2_XXYY * 2.0 * y, 0.0),
    ]
}

/// Estimated 9-coefficient lighting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SHLighting {
    pub coefficients: [f64; 9],
    /// RMS of the fit residual over the pixels used for estimation.
    pub rms_residual: f64,
    /// Set when the normal field did not span all 9 basis directions; the
    /// coefficients are then the minimum-norm solution.
    pub rank_deficient: bool,
}

impl SHLighting {
    pub fn from_coefficients(coefficients: [f64; 9]) -> SHLighting {
        SHLighting {
            coefficients,
            rms_residual: 0.0,
            rank_deficient: false,
        }
    }

    /// Irradiance for a unit normal.
    pub fn shade(&self, normal: &Vector3<f64>) -> f64 {
        let h = sh_basis_unit(normal);
        h.iter().zip(&self.coefficients).map(|(&b, &l)| b * l).sum()
    }
}

/// Albedo: constant, or a per-pixel map.
#[derive(Debug, Clone)]
pub enum Albedo {
    Constant(f64),
    Map(ScalarMap),
}

impl Albedo {
    fn at(&self, x: usize, y: usize) -> f64 {
        match self {
            Albedo::Constant(a) => *a,
            Albedo::Map(m) => m.get(x, y).unwrap_or(0.0),
        }
    }
}

/// Weights of the refinement energy.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ShadingWeights {
    pub lambda_photo: f64,
    pub lambda_depth: f64,
    pub lambda_smooth: f64,
}

impl Default for ShadingWeights {
    fn default() -> Self {
        ShadingWeights {
            lambda_photo: 1.0,
            lambda_depth: 2.0,
            lambda_smooth: 4.0,
        }
    }
}

/// Inputs for lighting estimation and depth refinement.
#[derive(Debug, Clone)]
pub struct ShadingProblem {
    /// Grayscale intensity in [0, 1].
    pub image: ScalarMap,
    pub albedo: Albedo,
    /// Coarse depth (meters, larger closer); its validity mask defines the
    /// refinement domain.
    pub coarse_depth: ScalarMap,
    pub camera: WeakPerspectiveCamera,
    pub weights: ShadingWeights,
    /// Gauss-Newton iteration cap.
    pub gn_iters: usize,
}

pub const DEFAULT_GN_ITERS: usize = 10;

impl ShadingProblem {
    pub fn new(
        image: ScalarMap,
        albedo: Albedo,
        coarse_depth: ScalarMap,
        camera: WeakPerspectiveCamera,
    ) -> Result<ShadingProblem> {
        image.check_size(coarse_depth.width(), coarse_depth.height())?;
        if let Albedo::Map(m) = &albedo {
            image.check_size(m.width(), m.height())?;
        }
        if coarse_depth.valid_count() == 0 {
            return Err(Error::Other("coarse depth mask is empty".into()));
        }
        Ok(ShadingProblem {
            image,
            albedo,
            coarse_depth,
            camera,
            weights: ShadingWeights::default(),
            gn_iters: DEFAULT_GN_ITERS,
        })
    }
}

/// Per-pixel unit normals derived from a depth map.
#[derive(Debug, Clone)]
pub struct NormalMap {
    width: usize,
    height: usize,
    normals: Vec<Option<Vector3<f64>>>,
    /// Full central-difference stencil available in both axes; only these
    /// pixels enter photometric terms.
    interior: Vec<bool>,
}

impl NormalMap {
    pub fn get(&self, x: usize, y: usize) -> Option<Vector3<f64>> {
        self.normals[y * self.width + x]
    }

    pub fn is_interior(&self, x: usize, y: usize) -> bool {
        self.interior[y * self.width + x]
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

/// Screen-space derivative along one axis: central where both neighbors are
/// valid, one-sided at mask borders, None when no neighbor is valid.
fn axis_gradient(d: &ScalarMap, x: i64, y: i64, dx: i64, dy: i64) -> Option<(f64, bool)> {
    let here = d.get_checked(x, y)?;
    let plus = d.get_checked(x + dx, y + dy);
    let minus = d.get_checked(x - dx, y - dy);
    match (plus, minus) {
        (Some(p), Some(m)) => Some(((p - m) / 2.0, true)),
        (Some(p), None) => Some((p - here, false)),
        (None, Some(m)) => Some((here - m, false)),
        (None, None) => None,
    }
}

/// Normals oriented toward the viewer:
/// `normalize(-dz/du * scale, -dz/dv * scale, 1)`.
pub fn depth_to_normals(depth: &ScalarMap, camera: &WeakPerspectiveCamera) -> NormalMap {
    let (width, height) = (depth.width(), depth.height());
    let s = camera.scale;
    let mut normals = vec![None; width * height];
    let mut interior = vec![false; width * height];
    for y in 0..height {
        for x in 0..width {
            if !depth.is_valid(x, y) {
                continue;
            }
            let gu = axis_gradient(depth, x as i64, y as i64, 1, 0);
            let gv = axis_gradient(depth, x as i64, y as i64, 0, 1);
            if let (Some((du, cu)), Some((dv, cv))) = (gu, gv) {
                let g = Vector3::new(-du * s, -dv * s, 1.0);
                normals[y * width + x] = Some(g.normalize());
                interior[y * width + x] = cu && cv;
            }
        }
    }
    NormalMap {
        width,
        height,
        normals,
        interior,
    }
}

/// The pixels carrying photometric terms for this problem: valid depth,
/// interior normal stencil, valid image sample.
fn photometric_pixels(problem: &ShadingProblem, normals: &NormalMap) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for y in 0..problem.coarse_depth.height() {
        for x in 0..problem.coarse_depth.width() {
            if normals.is_interior(x, y)
                && problem.image.get(x, y).is_some()
                && normals.get(x, y).is_some()
            {
                out.push((x, y));
            }
        }
    }
    out
}

/// Least-squares SH lighting from the coarse surface:
/// `min_l sum_p (rho_p * l . H(n_p) - I_p)^2`.
pub fn estimate_lighting(problem: &ShadingProblem) -> Result<SHLighting> {
    let normals = depth_to_normals(&problem.coarse_depth, &problem.camera);
    let pixels = photometric_pixels(problem, &normals);
    if pixels.len() < 9 {
        return Err(Error::TooFewShadingPixels {
            pixels: pixels.len(),
        });
    }

    let mut gram = DMatrix::<f64>::zeros(9, 9);
    let mut rhs = DVector::<f64>::zeros(9);
    for &(x, y) in &pixels {
        let n = normals.get(x, y).unwrap();
        let h = sh_basis_unit(&n);
        let rho = problem.albedo.at(x, y);
        let intensity = problem.image.get(x, y).unwrap();
        for i in 0..9 {
            rhs[i] += rho * h[i] * intensity;
            for j in 0..9 {
                gram[(i, j)] += rho * rho * h[i] * h[j];
            }
        }
    }

    // eigendecomposition gives the minimum-norm solution and a rank flag
    let eig = nalgebra::SymmetricEigen::new(gram);
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let threshold = max_ev * 1e-10;
    let mut rank = 0usize;
    let mut coeffs = DVector::<f64>::zeros(9);
    for k in 0..9 {
        let ev = eig.eigenvalues[k];
        if ev > threshold {
            rank += 1;
            let basis = eig.eigenvectors.column(k);
            let proj = basis.dot(&rhs) / ev;
            coeffs += basis * proj;
        }
    }

    let lighting = SHLighting {
        coefficients: std::array::from_fn(|i| coeffs[i]),
        rms_residual: 0.0,
        rank_deficient: rank < 9,
    };
    let (rms, _) = photometric_loss(&problem.coarse_depth, problem, &lighting)?;
    Ok(SHLighting {
        rms_residual: rms,
        ..lighting
    })
}

/// Per-pixel photometric residual `rho * l . H(n(depth)) - I` over the
/// photometric pixel set of `depth`, and its RMS.
pub fn photometric_loss(
    depth: &ScalarMap,
    problem: &ShadingProblem,
    lighting: &SHLighting,
) -> Result<(f64, ScalarMap)> {
    depth.check_size(problem.image.width(), problem.image.height())?;
    let normals = depth_to_normals(depth, &problem.camera);
    let mut residuals = ScalarMap::new_invalid(depth.width(), depth.height());
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for y in 0..depth.height() {
        for x in 0..depth.width() {
            if !normals.is_interior(x, y) {
                continue;
            }
            let (Some(n), Some(intensity)) = (normals.get(x, y), problem.image.get(x, y)) else {
                continue;
            };
            let r = problem.albedo.at(x, y) * lighting.shade(&n) - intensity;
            residuals.set(x, y, r);
            sum_sq += r * r;
            count += 1;
        }
    }
    let rms = if count == 0 {
        0.0
    } else {
        (sum_sq / count as f64).sqrt()
    };
    Ok((rms, residuals))
}

/// Result of a refinement run.
#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub depth: ScalarMap,
    /// Total energy after each accepted step, starting with the initial
    /// energy. Non-increasing by construction.
    pub energy_trace: Vec<f64>,
    /// False when the iteration cap was reached while the energy was still
    /// improving.
    pub converged: bool,
}

struct EnergyTerms {
    /// Unknown index per pixel (usize::MAX where invalid).
    index_of: Vec<usize>,
    /// Pixel per unknown.
    pixels: Vec<(usize, usize)>,
    /// Graph-Laplacian smoothness neighbors per unknown.
    smooth_neighbors: Vec<Vec<usize>>,
}

impl EnergyTerms {
    fn build(mask_source: &ScalarMap) -> EnergyTerms {
        let (w, h) = (mask_source.width(), mask_source.height());
        let mut index_of = vec![usize::MAX; w * h];
        let mut pixels = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if mask_source.is_valid(x, y) {
                    index_of[y * w + x] = pixels.len();
                    pixels.push((x, y));
                }
            }
        }
        let smooth_neighbors = pixels
            .iter()
            .map(|&(x, y)| {
                let mut n = Vec::new();
                for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                        let idx = index_of[ny as usize * w + nx as usize];
                        if idx != usize::MAX {
                            n.push(idx);
                        }
                    }
                }
                n
            })
            .collect();
        EnergyTerms {
            index_of,
            pixels,
            smooth_neighbors,
        }
    }

    fn to_map(&self, source: &ScalarMap, values: &[f64]) -> ScalarMap {
        let mut out = ScalarMap::new_invalid(source.width(), source.height());
        for (i, &(x, y)) in self.pixels.iter().enumerate() {
            out.set(x, y, values[i]);
        }
        out
    }
}

/// Total refinement energy at a candidate depth.
fn total_energy(
    problem: &ShadingProblem,
    lighting: &SHLighting,
    terms: &EnergyTerms,
    values: &[f64],
) -> f64 {
    let depth = terms.to_map(&problem.coarse_depth, values);
    let w = problem.weights;
    let (_, residuals) = photometric_loss(&depth, problem, lighting).expect("aligned");
    let mut e = 0.0;
    for y in 0..depth.height() {
        for x in 0..depth.width() {
            if let Some(r) = residuals.get(x, y) {
                e += w.lambda_photo * r * r;
            }
        }
    }
    let detail: Vec<f64> = terms
        .pixels
        .iter()
        .zip(values)
        .map(|(&(x, y), &v)| v - problem.coarse_depth.get(x, y).unwrap())
        .collect();
    for (i, &d) in detail.iter().enumerate() {
        e += w.lambda_depth * d * d;
        // smoothness acts on the detail layer so the coarse surface itself
        // is a stationary point of the energy
        let lap: f64 = terms.smooth_neighbors[i].iter().map(|&j| detail[j] - d).sum();
        e += w.lambda_smooth * lap * lap;
    }
    e
}

/// Analytic gradient of `total_energy` with respect to the unknowns,
/// computed as `2 J^T r` from the assembled residual system. Public within
/// the crate for gradient-check tests.
pub fn energy_gradient(
    problem: &ShadingProblem,
    lighting: &SHLighting,
    depth: &ScalarMap,
) -> Result<Vec<f64>> {
    let terms = EnergyTerms::build(&problem.coarse_depth);
    let values: Vec<f64> = terms
        .pixels
        .iter()
        .map(|&(x, y)| depth.get(x, y).expect("same mask"))
        .collect();
    let (jac, res) = assemble_system(problem, lighting, &terms, &values)?;
    let mut grad = vec![0.0; values.len()];
    jac.add_transpose_mul_vec(&res, &mut grad);
    for g in &mut grad {
        *g *= 2.0;
    }
    Ok(grad)
}

/// Assemble the weighted residual vector and Jacobian of the energy at the
/// current values (rows pre-scaled by sqrt(lambda)).
fn assemble_system(
    problem: &ShadingProblem,
    lighting: &SHLighting,
    terms: &EnergyTerms,
    values: &[f64],
) -> Result<(CsrMatrix, Vec<f64>)> {
    let depth = terms.to_map(&problem.coarse_depth, values);
    let normals = depth_to_normals(&depth, &problem.camera);
    let w = problem.weights;
    let s = problem.camera.scale;
    let (width, _) = (depth.width(), depth.height());

    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut residuals: Vec<f64> = Vec::new();
    let mut row = 0usize;

    // photometric rows (interior stencil only: the four axis neighbors)
    let sqrt_photo = w.lambda_photo.sqrt();
    if w.lambda_photo > 0.0 {
        for y in 0..depth.height() {
            for x in 0..depth.width() {
                if !normals.is_interior(x, y) {
                    continue;
                }
                let (Some(n), Some(intensity)) = (normals.get(x, y), problem.image.get(x, y))
                else {
                    continue;
                };
                let rho = problem.albedo.at(x, y);
                let r = rho * lighting.shade(&n) - intensity;

                // d(shade)/dn
                let grads = sh_basis_gradient(&n);
                let mut dshade_dn = Vector3::zeros();
                for k in 0..9 {
                    dshade_dn += grads[k] * lighting.coefficients[k];
                }
                // n = g/|g|: dn/dg = (I - n n^T)/|g|; reconstruct |g| from
                // g_z_normalized = 1/|g|
                let inv_len = n.z.max(1e-12); // g = (.., .., 1) so n.z = 1/|g|
                let dn_dg = (nalgebra::Matrix3::identity() - n * n.transpose()) * inv_len;
                let dr_dg = (dn_dg.transpose() * dshade_dn) * rho;

                // g = (-s*Du, -s*Dv, 1), central differences with spacing 1
                let du_plus = terms.index_of[y * width + (x + 1)];
                let du_minus = terms.index_of[y * width + (x - 1)];
                let dv_plus = terms.index_of[(y + 1) * width + x];
                let dv_minus = terms.index_of[(y - 1) * width + x];
                let c = -s * 0.5;
                triplets.push((row, du_plus, sqrt_photo * dr_dg.x * c));
                triplets.push((row, du_minus, -sqrt_photo * dr_dg.x * c));
                triplets.push((row, dv_plus, sqrt_photo * dr_dg.y * c));
                triplets.push((row, dv_minus, -sqrt_photo * dr_dg.y * c));
                residuals.push(sqrt_photo * r);
                row += 1;
            }
        }
    }

    // depth-fidelity rows
    let sqrt_depth = w.lambda_depth.sqrt();
    for (i, &(x, y)) in terms.pixels.iter().enumerate() {
        let coarse = problem.coarse_depth.get(x, y).unwrap();
        triplets.push((row, i, sqrt_depth));
        residuals.push(sqrt_depth * (values[i] - coarse));
        row += 1;
    }

    // smoothness rows: graph Laplacian of the detail layer (d - coarse)
    // over in-mask 4-neighbors
    let sqrt_smooth = w.lambda_smooth.sqrt();
    if w.lambda_smooth > 0.0 {
        let detail: Vec<f64> = terms
            .pixels
            .iter()
            .zip(values)
            .map(|(&(x, y), &v)| v - problem.coarse_depth.get(x, y).unwrap())
            .collect();
        for (i, neighbors) in terms.smooth_neighbors.iter().enumerate() {
            let mut lap = 0.0;
            for &j in neighbors {
                triplets.push((row, j, sqrt_smooth));
                lap += detail[j] - detail[i];
            }
            triplets.push((row, i, -sqrt_smooth * neighbors.len() as f64));
            residuals.push(sqrt_smooth * lap);
            row += 1;
        }
    }

    Ok((
        CsrMatrix::from_triplets(row, values.len(), &mut triplets),
        residuals,
    ))
}

/// Gauss-Newton refinement of the coarse depth against the image under the
/// given lighting. Steps are halved (up to 8 times) until the energy
/// decreases; the energy trace is non-increasing. Output validity equals
/// the input mask.
pub fn refine_depth(problem: &ShadingProblem, lighting: &SHLighting) -> Result<RefineOutcome> {
    problem
        .image
        .check_size(problem.coarse_depth.width(), problem.coarse_depth.height())?;
    let terms = EnergyTerms::build(&problem.coarse_depth);
    let mut values: Vec<f64> = terms
        .pixels
        .iter()
        .map(|&(x, y)| problem.coarse_depth.get(x, y).unwrap())
        .collect();

    let mut energy = total_energy(problem, lighting, &terms, &values);
    let mut trace = vec![energy];
    let mut converged = false;

    for _ in 0..problem.gn_iters {
        let (jac, res) = assemble_system(problem, lighting, &terms, &values)?;
        // gradient of E = sum r^2 is 2 J^T r; stop when it is negligible
        let mut grad = vec![0.0; values.len()];
        jac.add_transpose_mul_vec(&res, &mut grad);
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < 1e-12 * (1.0 + energy) {
            converged = true;
            break;
        }

        // Gauss-Newton step: (J^T J) delta = -J^T r  (grad is 2 J^T r)
        let op = NormalEquations::new(&jac, vec![0.0; values.len()]);
        let rhs: Vec<f64> = grad.iter().map(|&g| -0.5 * g).collect();
        let delta = conjugate_gradient(&op, &rhs, None, 1e-8, 20 * values.len() + 200)?;

        // damped step: halve until the energy decreases
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=8 {
            let candidate: Vec<f64> = values
                .iter()
                .zip(&delta)
                .map(|(&v, &d)| v + alpha * d)
                .collect();
            let e = total_energy(problem, lighting, &terms, &candidate);
            if e < energy {
                values = candidate;
                energy = e;
                trace.push(e);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // no descent direction left at this linearization
            converged = true;
            break;
        }
        let len = trace.len();
        if len >= 2 && (trace[len - 2] - trace[len - 1]) <= 1e-14 * (1.0 + trace[len - 2]) {
            converged = true;
            break;
        }
    }

    let depth = terms.to_map(&problem.coarse_depth, &values);
    debug_assert!(depth
        .validity_mask()
        .pixels()
        .iter()
        .zip(problem.coarse_depth.validity_mask().pixels())
        .all(|(a, b)| a == b));
    Ok(RefineOutcome {
        depth,
        energy_trace: trace,
        converged,
    })
}

/// `out = coarse + factor * (refined - coarse)` on the common valid mask.
pub fn magnify_details(refined: &ScalarMap, coarse: &ScalarMap, factor: f64) -> Result<ScalarMap> {
    refined.check_size(coarse.width(), coarse.height())?;
    let mut out = ScalarMap::new_invalid(coarse.width(), coarse.height());
    for y in 0..coarse.height() {
        for x in 0..coarse.width() {
            if let (Some(c), Some(r)) = (coarse.get(x, y), refined.get(x, y)) {
                out.set(x, y, c + factor * (r - c));
            }
        }
    }
    Ok(out)
}

/// Synthesize a shading image from a depth map (used by fixtures and the
/// pipeline's self-tests): intensity on every pixel with a derivable normal.
pub fn render_shading(
    depth: &ScalarMap,
    camera: &WeakPerspectiveCamera,
    lighting: &SHLighting,
    albedo: &Albedo,
) -> ScalarMap {
    let normals = depth_to_normals(depth, camera);
    ScalarMap::from_fn(depth.width(), depth.height(), |x, y| {
        normals.get(x, y).map(|n| albedo.at(x, y) * lighting.shade(&n))
    })
}
