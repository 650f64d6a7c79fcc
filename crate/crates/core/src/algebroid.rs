//! Local models of Lie algebroids: anchor, structure functions, the
//! exterior differential of base functions, and the structure-equation
//! residuals that certify a model.
//!
//! A model lives in a single chart. Structure functions are stored only
//! for index pairs `alpha < beta`; the accessor antisymmetrizes, so the
//! antisymmetry invariant holds identically.

use crate::dual::Dual1;
use crate::error::{CoreError, EvalError, Result};
use crate::expr::Expr;
use crate::field::{Arity, FieldBody, FieldScalar, ScalarField};
use crate::linalg::{Mat, Tensor3, Tensor4};
use std::sync::Arc;

/// Which bundle a point lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Velocities on E x R.
    Lagrangian,
    /// Momenta on E* x R.
    Hamiltonian,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Lagrangian => "lagrangian",
            Side::Hamiltonian => "hamiltonian",
        }
    }

    /// Coordinate prefix used in output files and expressions.
    pub fn fiber_prefix(self) -> &'static str {
        match self {
            Side::Lagrangian => "y",
            Side::Hamiltonian => "p",
        }
    }
}

/// A point (q, w, s) of E x R or E* x R in local coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub q: Vec<f64>,
    pub w: Vec<f64>,
    pub s: f64,
    pub side: Side,
}

impl State {
    pub fn new(q: Vec<f64>, w: Vec<f64>, s: f64, side: Side) -> Self {
        Self { q, w, s, side }
    }

    pub fn lagrangian(q: Vec<f64>, y: Vec<f64>, s: f64) -> Self {
        Self::new(q, y, s, Side::Lagrangian)
    }

    pub fn hamiltonian(q: Vec<f64>, p: Vec<f64>, s: f64) -> Self {
        Self::new(q, p, s, Side::Hamiltonian)
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.w.iter()).all(|x| x.is_finite()) && self.s.is_finite()
    }
}

/// Time derivative of a state along a section.
#[derive(Clone, Debug, PartialEq)]
pub struct StateDerivative {
    pub dq: Vec<f64>,
    pub dw: Vec<f64>,
    pub ds: f64,
}

impl StateDerivative {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            dq: vec![0.0; n],
            dw: vec![0.0; m],
            ds: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.dq.iter().chain(self.dw.iter()).all(|x| x.is_finite()) && self.ds.is_finite()
    }
}

/// Tolerance used when a constructor certifies the structure equations.
pub const STRUCTURE_VALIDATION_TOL: f64 = 1e-9;

fn pair_count(m: usize) -> usize {
    m * (m - 1) / 2
}

/// Index of the ordered pair (a, b), a < b, in lexicographic order.
fn pair_index(a: usize, b: usize, m: usize) -> usize {
    debug_assert!(a < b && b < m);
    a * m - a * (a + 1) / 2 + (b - a - 1)
}

/// Negation wrapper so constructors can flip a field's sign without
/// touching its body.
struct NegField {
    inner: ScalarField,
}

impl FieldBody for NegField {
    fn eval_f64(&self, q: &[f64], w: &[f64], s: f64) -> Result<f64, EvalError> {
        self.inner
            .eval_at(q, w, s)
            .map(|v| -v)
            .map_err(flatten_eval)
    }
    fn eval_dual(&self, q: &[Dual1], w: &[Dual1], s: Dual1) -> Result<Dual1, EvalError> {
        self.inner
            .eval_at(q, w, s)
            .map(|v| -v)
            .map_err(flatten_eval)
    }
    fn eval_dual2(
        &self,
        q: &[crate::dual::Dual2],
        w: &[crate::dual::Dual2],
        s: crate::dual::Dual2,
    ) -> Result<crate::dual::Dual2, EvalError> {
        self.inner
            .eval_at(q, w, s)
            .map(|v| -v)
            .map_err(flatten_eval)
    }
    fn describe(&self) -> String {
        format!("-({})", self.inner.describe())
    }
}

fn flatten_eval(e: CoreError) -> EvalError {
    match e {
        CoreError::Eval(inner) => inner,
        other => EvalError {
            kind: crate::error::DomainErrorKind::NonFinite,
            at: other.to_string(),
        },
    }
}

fn negate(field: &ScalarField) -> ScalarField {
    let arity = field.arity();
    ScalarField::from_body(
        Arc::new(NegField {
            inner: field.clone(),
        }),
        arity,
    )
}

/// Local description of a Lie algebroid: dimensions, anchor field and
/// structure-function field.
#[derive(Clone)]
pub struct AlgebroidModel {
    n: usize,
    m: usize,
    /// Anchor entries rho^i_alpha, row-major i * m + alpha, functions of q.
    anchor: Vec<ScalarField>,
    /// Structure entries C^gamma_{alpha beta} for alpha < beta,
    /// index gamma * pair_count(m) + pair_index(alpha, beta).
    structure: Vec<ScalarField>,
    label: String,
}

impl std::fmt::Debug for AlgebroidModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AlgebroidModel")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("label", &self.label)
            .finish()
    }
}

impl AlgebroidModel {
    /// Assemble a model from chart data without certifying the structure
    /// equations. Dimensions are still enforced.
    pub fn from_parts(
        n: usize,
        m: usize,
        anchor: Vec<ScalarField>,
        structure: Vec<ScalarField>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if m == 0 {
            return Err(CoreError::Invalid(
                "algebroid rank m must be at least 1".into(),
            ));
        }
        if anchor.len() != n * m {
            return Err(CoreError::DimensionMismatch {
                what: "anchor entries",
                expected: n * m,
                got: anchor.len(),
            });
        }
        if structure.len() != m * pair_count(m) {
            return Err(CoreError::DimensionMismatch {
                what: "structure entries (gamma, alpha < beta)",
                expected: m * pair_count(m),
                got: structure.len(),
            });
        }
        for f in anchor.iter().chain(structure.iter()) {
            if f.arity().m != 0 || f.arity().depends_on_s {
                return Err(CoreError::Invalid(
                    "anchor and structure entries must depend on q only".into(),
                ));
            }
            if f.arity().n != n {
                return Err(CoreError::DimensionMismatch {
                    what: "chart-entry base dimension",
                    expected: n,
                    got: f.arity().n,
                });
            }
        }
        Ok(Self {
            n,
            m,
            anchor,
            structure,
            label: label.into(),
        })
    }

    /// As [`from_parts`](Self::from_parts), then certify the structure
    /// equations on sampled chart points.
    pub fn validated(
        n: usize,
        m: usize,
        anchor: Vec<ScalarField>,
        structure: Vec<ScalarField>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let model = Self::from_parts(n, m, anchor, structure, label)?;
        model.certify(STRUCTURE_VALIDATION_TOL)?;
        Ok(model)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn check_state(&self, state: &State) -> Result<()> {
        if state.q.len() != self.n {
            return Err(CoreError::DimensionMismatch {
                what: "state q",
                expected: self.n,
                got: state.q.len(),
            });
        }
        if state.w.len() != self.m {
            return Err(CoreError::DimensionMismatch {
                what: "state w",
                expected: self.m,
                got: state.w.len(),
            });
        }
        Ok(())
    }

    fn check_q(&self, q_len: usize) -> Result<()> {
        if q_len != self.n {
            return Err(CoreError::DimensionMismatch {
                what: "base point q",
                expected: self.n,
                got: q_len,
            });
        }
        Ok(())
    }

    /// Anchor entries at any scalar level, flat n x m row-major.
    pub fn anchor_at<T: FieldScalar>(&self, q: &[T]) -> Result<Vec<T>> {
        self.check_q(q.len())?;
        self.anchor
            .iter()
            .map(|f| f.eval_at(q, &[], T::zero()))
            .collect()
    }

    /// The anchor matrix rho^i_alpha(q); 0 x m when the base is a point.
    pub fn anchor_matrix(&self, q: &[f64]) -> Result<Mat> {
        let flat = self.anchor_at(q)?;
        Ok(Mat::from_fn(self.n, self.m, |i, a| flat[i * self.m + a]))
    }

    /// Structure entries at any scalar level, flat (gamma, alpha, beta)
    /// with the full antisymmetrized index range.
    pub fn structure_at<T: FieldScalar>(&self, q: &[T]) -> Result<Vec<T>> {
        self.check_q(q.len())?;
        let m = self.m;
        let pairs = pair_count(m);
        let mut full = vec![T::zero(); m * m * m];
        for g in 0..m {
            for a in 0..m {
                for b in a + 1..m {
                    let v = self.structure[g * pairs + pair_index(a, b, m)].eval_at(
                        q,
                        &[],
                        T::zero(),
                    )?;
                    full[(g * m + a) * m + b] = v;
                    full[(g * m + b) * m + a] = -v;
                }
            }
        }
        Ok(full)
    }

    /// The structure tensor C^gamma_{alpha beta}(q), antisymmetric in
    /// (alpha, beta) by construction.
    pub fn structure_tensor(&self, q: &[f64]) -> Result<Tensor3> {
        let flat = self.structure_at(q)?;
        let m = self.m;
        let mut t = Tensor3::zeros(m, m, m);
        for g in 0..m {
            for a in 0..m {
                for b in 0..m {
                    t[(g, a, b)] = flat[(g * m + a) * m + b];
                }
            }
        }
        Ok(t)
    }

    /// Components of the exterior differential of a base function:
    /// (d^E f)_alpha = rho^i_alpha df/dq^i.
    pub fn d_e_function(&self, f: &ScalarField, q: &[f64]) -> Result<Vec<f64>> {
        self.check_q(q.len())?;
        if f.arity().m != 0 || f.arity().depends_on_s {
            return Err(CoreError::Invalid(
                "d^E applies to functions of the base coordinates only".into(),
            ));
        }
        let rho = self.anchor_at(q)?;
        let mut grad = vec![0.0; self.n];
        for (i, g) in grad.iter_mut().enumerate() {
            let qd: Vec<Dual1> = q
                .iter()
                .enumerate()
                .map(|(j, &x)| {
                    if j == i {
                        Dual1::variable(x)
                    } else {
                        Dual1::constant(x)
                    }
                })
                .collect();
            *g = f.eval_at(&qd, &[], Dual1::constant(0.0))?.du;
        }
        let mut out = vec![0.0; self.m];
        for (a, o) in out.iter_mut().enumerate() {
            *o = (0..self.n).map(|i| rho[i * self.m + a] * grad[i]).sum();
        }
        Ok(out)
    }

    /// Partial derivatives of the anchor, flat (j, i, alpha):
    /// d rho^i_alpha / d q^j.
    fn anchor_derivatives(&self, q: &[f64]) -> Result<Vec<f64>> {
        let (n, m) = (self.n, self.m);
        let mut out = vec![0.0; n * n * m];
        for j in 0..n {
            let qd: Vec<Dual1> = q
                .iter()
                .enumerate()
                .map(|(k, &x)| {
                    if k == j {
                        Dual1::variable(x)
                    } else {
                        Dual1::constant(x)
                    }
                })
                .collect();
            let vals = self.anchor_at(&qd)?;
            for (idx, v) in vals.iter().enumerate() {
                out[j * n * m + idx] = v.du;
            }
        }
        Ok(out)
    }

    /// Partial derivatives of the full structure tensor, flat
    /// (j, gamma, alpha, beta).
    fn structure_derivatives(&self, q: &[f64]) -> Result<Vec<f64>> {
        let (n, m) = (self.n, self.m);
        let mut out = vec![0.0; n * m * m * m];
        for j in 0..n {
            let qd: Vec<Dual1> = q
                .iter()
                .enumerate()
                .map(|(k, &x)| {
                    if k == j {
                        Dual1::variable(x)
                    } else {
                        Dual1::constant(x)
                    }
                })
                .collect();
            let vals = self.structure_at(&qd)?;
            for (idx, v) in vals.iter().enumerate() {
                out[j * m * m * m + idx] = v.du;
            }
        }
        Ok(out)
    }

    /// Residuals of the two structure equations at q.
    ///
    /// `jacobi[(nu, alpha, beta, gamma)]` is the cyclic sum
    /// `sum_cyc (rho^i_alpha dC^nu_{beta gamma}/dq^i + C^nu_{alpha mu} C^mu_{beta gamma})`,
    /// `anchor[(i, alpha, beta)]` is
    /// `rho^j_alpha d rho^i_beta/dq^j - rho^j_beta d rho^i_alpha/dq^j - rho^i_gamma C^gamma_{alpha beta}`.
    /// Both vanish for a genuine Lie algebroid.
    pub fn structure_residuals(&self, q: &[f64]) -> Result<(Tensor4, Tensor3)> {
        self.check_q(q.len())?;
        let (n, m) = (self.n, self.m);
        let rho = self.anchor_at(q)?;
        let c = self.structure_at(q)?;
        let drho = self.anchor_derivatives(q)?;
        let dc = self.structure_derivatives(q)?;

        let cval = |g: usize, a: usize, b: usize| c[(g * m + a) * m + b];
        let dcval =
            |j: usize, g: usize, a: usize, b: usize| dc[j * m * m * m + (g * m + a) * m + b];
        let rhoval = |i: usize, a: usize| rho[i * m + a];
        let drhoval = |j: usize, i: usize, a: usize| drho[j * n * m + i * m + a];

        let mut jacobi = Tensor4::zeros(m, m, m, m);
        for nu in 0..m {
            for a in 0..m {
                for b in 0..m {
                    for g in 0..m {
                        let mut acc = 0.0;
                        for (x, y, z) in [(a, b, g), (b, g, a), (g, a, b)] {
                            for i in 0..n {
                                acc += rhoval(i, x) * dcval(i, nu, y, z);
                            }
                            for mu in 0..m {
                                acc += cval(nu, x, mu) * cval(mu, y, z);
                            }
                        }
                        jacobi[(nu, a, b, g)] = acc;
                    }
                }
            }
        }

        let mut anchor_res = Tensor3::zeros(n, m, m);
        for i in 0..n {
            for a in 0..m {
                for b in 0..m {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += rhoval(j, a) * drhoval(j, i, b) - rhoval(j, b) * drhoval(j, i, a);
                    }
                    for g in 0..m {
                        acc -= rhoval(i, g) * cval(g, a, b);
                    }
                    anchor_res[(i, a, b)] = acc;
                }
            }
        }

        Ok((jacobi, anchor_res))
    }

    /// Certify the structure equations on a deterministic point sample;
    /// reports the first offending index on failure.
    pub fn certify(&self, tolerance: f64) -> Result<()> {
        for q in sample_points(self.n, 40, 0x5eed) {
            let (jacobi, anchor_res) = self.structure_residuals(&q)?;
            let m = self.m;
            for nu in 0..m {
                for a in 0..m {
                    for b in 0..m {
                        for g in 0..m {
                            let v = jacobi[(nu, a, b, g)];
                            if v.abs() > tolerance {
                                return Err(CoreError::StructureValidation {
                                    which: "Jacobi",
                                    indices: vec![nu, a, b, g],
                                    value: v,
                                    tolerance,
                                });
                            }
                        }
                    }
                }
            }
            for i in 0..self.n {
                for a in 0..m {
                    for b in 0..m {
                        let v = anchor_res[(i, a, b)];
                        if v.abs() > tolerance {
                            return Err(CoreError::StructureValidation {
                                which: "anchor-compatibility",
                                indices: vec![i, a, b],
                                value: v,
                                tolerance,
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Deterministic pseudo-random points in [-1, 1]^n (splitmix64 driven);
/// always includes the origin.
pub fn sample_points(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut state = seed;
    let mut next = move || {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
        ((z >> 11) as f64) / ((1_u64 << 53) as f64) * 2.0 - 1.0
    };
    let mut pts = vec![vec![0.0; n]];
    for _ in 0..count {
        pts.push((0..n).map(|_| next()).collect());
    }
    pts
}

// ---------------------------------------------------------------------------
// Builtin models
// ---------------------------------------------------------------------------

fn constant_entries(n: usize, values: impl IntoIterator<Item = f64>) -> Vec<ScalarField> {
    values
        .into_iter()
        .map(|v| ScalarField::from_expr(Expr::num(v), Arity::base_only(n)))
        .collect()
}

/// Pack a dense (possibly q-independent) tensor c[gamma][alpha][beta]
/// into the alpha < beta storage, checking antisymmetry exactly.
fn pack_constants(m: usize, c: &[f64]) -> Result<Vec<f64>> {
    if c.len() != m * m * m {
        return Err(CoreError::DimensionMismatch {
            what: "structure constants",
            expected: m * m * m,
            got: c.len(),
        });
    }
    let at = |g: usize, a: usize, b: usize| c[(g * m + a) * m + b];
    for g in 0..m {
        for a in 0..m {
            if at(g, a, a) != 0.0 {
                return Err(CoreError::Invalid(format!(
                    "structure constants must vanish on the diagonal: C^{}_{}{} = {}",
                    g + 1,
                    a + 1,
                    a + 1,
                    at(g, a, a)
                )));
            }
            for b in a + 1..m {
                if at(g, a, b) != -at(g, b, a) {
                    return Err(CoreError::Invalid(format!(
                        "structure constants are not antisymmetric at C^{}_{}{}",
                        g + 1,
                        a + 1,
                        b + 1
                    )));
                }
            }
        }
    }
    let pairs = pair_count(m);
    let mut packed = vec![0.0; m * pairs];
    for g in 0..m {
        for a in 0..m {
            for b in a + 1..m {
                packed[g * pairs + pair_index(a, b, m)] = at(g, a, b);
            }
        }
    }
    Ok(packed)
}

/// E = TQ with the identity anchor and commuting coordinate sections.
pub fn tangent_bundle(n: usize) -> Result<AlgebroidModel> {
    if n == 0 {
        return Err(CoreError::Invalid("tangent bundle needs n >= 1".into()));
    }
    let anchor = constant_entries(
        n,
        (0..n * n).map(|idx| if idx / n == idx % n { 1.0 } else { 0.0 }),
    );
    let structure = constant_entries(n, vec![0.0; n * pair_count(n)]);
    AlgebroidModel::validated(n, n, anchor, structure, format!("tangent_bundle({})", n))
}

/// A Lie algebra over a point: zero anchor, constant structure constants
/// `c[gamma][alpha][beta]` (dense, antisymmetric in the lower pair).
pub fn lie_algebra(
    m: usize,
    constants: &[f64],
    label: impl Into<String>,
) -> Result<AlgebroidModel> {
    let packed = pack_constants(m, constants)?;
    let structure = constant_entries(0, packed);
    AlgebroidModel::validated(0, m, Vec::new(), structure, label)
}

/// Levi-Civita structure constants, dense `c[gamma][alpha][beta]`.
pub fn so3_constants() -> Vec<f64> {
    let mut c = vec![0.0; 27];
    let eps = |a: usize, b: usize, g: usize| -> f64 {
        match (a, b, g) {
            (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
            (1, 0, 2) | (2, 1, 0) | (0, 2, 1) => -1.0,
            _ => 0.0,
        }
    };
    for g in 0..3 {
        for a in 0..3 {
            for b in 0..3 {
                c[(g * 3 + a) * 3 + b] = eps(a, b, g);
            }
        }
    }
    c
}

/// so(3) as a Lie algebroid over a point.
pub fn so3() -> AlgebroidModel {
    lie_algebra(3, &so3_constants(), "so3").expect("so3 constants satisfy the structure equations")
}

/// Action algebroid Q x g -> Q with anchor rho(q, xi) = -xi_Q(q).
///
/// `generators[alpha]` holds the n components of the infinitesimal
/// generator of the basis element e_alpha; `constants` are the dense
/// structure constants of g.
pub fn action_algebroid(
    n: usize,
    m: usize,
    constants: &[f64],
    generators: &[Vec<ScalarField>],
    label: impl Into<String>,
) -> Result<AlgebroidModel> {
    if generators.len() != m {
        return Err(CoreError::DimensionMismatch {
            what: "generator count",
            expected: m,
            got: generators.len(),
        });
    }
    let mut anchor = Vec::with_capacity(n * m);
    for i in 0..n {
        for gen in generators.iter() {
            if gen.len() != n {
                return Err(CoreError::DimensionMismatch {
                    what: "generator components",
                    expected: n,
                    got: gen.len(),
                });
            }
            anchor.push(negate(&gen[i]));
        }
    }
    let packed = pack_constants(m, constants)?;
    let structure = constant_entries(n, packed);
    AlgebroidModel::validated(n, m, anchor, structure, label)
}

/// so(3) acting on R^3 by xi_Q(q) = xi x q.
pub fn action_so3_on_r3() -> AlgebroidModel {
    use crate::expr::VarRef;
    let q = |i: usize| Expr::var(VarRef::Q(i));
    // Generator of e_alpha: (e_alpha x q)_i = eps_{alpha i k} q_k ... spelled out.
    let gen = |rows: [Expr; 3]| {
        rows.into_iter()
            .map(|e| ScalarField::from_expr(e, Arity::base_only(3)))
            .collect::<Vec<_>>()
    };
    let zero = || Expr::num(0.0);
    let generators = vec![
        // e1 x q = (0, -q3, q2)
        gen([zero(), Expr::neg(q(2)), q(1)]),
        // e2 x q = (q3, 0, -q1)
        gen([q(2), zero(), Expr::neg(q(0))]),
        // e3 x q = (-q2, q1, 0)
        gen([Expr::neg(q(1)), q(0), zero()]),
    ];
    action_algebroid(3, 3, &so3_constants(), &generators, "action_so3_on_r3")
        .expect("the so(3) action on R^3 satisfies the structure equations")
}

/// Chart data for the Atiyah algebroid of a trivial principal bundle,
/// in the basis {horizontal lifts e_i, vertical ê_A}.
///
/// `connection[a * base_dim + i]` is A^a_i(q); `curvature` holds B^a_{ij}
/// for i < j in pair order, consistent with
/// B^a_{ij} = d_i A^a_j - d_j A^a_i - c^a_{bc} A^b_i A^c_j.
pub struct AtiyahData {
    pub base_dim: usize,
    pub fiber_dim: usize,
    /// Dense structure constants of the structure group's Lie algebra.
    pub algebra: Vec<f64>,
    pub connection: Vec<Expr>,
    pub curvature: Vec<Expr>,
}

/// Atiyah algebroid of a trivial bundle. The bracket relations are
///   [e_i, e_j]   = -B^c_{ij} ê_c
///   [e_i, ê_b]   = -c^c_{db} A^d_i ê_c
///   [ê_a, ê_b]   =  c^c_{ab} ê_c
/// with the identity anchor on horizontal sections; construction is
/// rejected when the supplied curvature breaks the structure equations.
pub fn atiyah_trivial(data: &AtiyahData, label: impl Into<String>) -> Result<AlgebroidModel> {
    let nb = data.base_dim;
    let d = data.fiber_dim;
    let m = nb + d;
    if nb == 0 || d == 0 {
        return Err(CoreError::Invalid(
            "atiyah_trivial needs base_dim >= 1 and fiber_dim >= 1".into(),
        ));
    }
    if data.connection.len() != d * nb {
        return Err(CoreError::DimensionMismatch {
            what: "connection entries",
            expected: d * nb,
            got: data.connection.len(),
        });
    }
    if data.curvature.len() != d * pair_count(nb) {
        return Err(CoreError::DimensionMismatch {
            what: "curvature entries (a, i < j)",
            expected: d * pair_count(nb),
            got: data.curvature.len(),
        });
    }
    let c = &data.algebra;
    if c.len() != d * d * d {
        return Err(CoreError::DimensionMismatch {
            what: "algebra constants",
            expected: d * d * d,
            got: c.len(),
        });
    }
    let cval = |g: usize, a: usize, b: usize| c[(g * d + a) * d + b];

    // Anchor: identity on the horizontal block, zero on the vertical one.
    let mut anchor = Vec::with_capacity(nb * m);
    for i in 0..nb {
        for al in 0..m {
            anchor.push(ScalarField::from_expr(
                Expr::num(if al == i { 1.0 } else { 0.0 }),
                Arity::base_only(nb),
            ));
        }
    }

    let pairs = pair_count(m);
    let mut structure =
        vec![ScalarField::from_expr(Expr::num(0.0), Arity::base_only(nb)); m * pairs];
    let mut set = |g: usize, a: usize, b: usize, f: ScalarField| {
        structure[g * pairs + pair_index(a, b, m)] = f;
    };

    // Horizontal pair: ê-components from the curvature, flipped sign.
    for i in 0..nb {
        for j in i + 1..nb {
            for gc in 0..d {
                let b_expr = data.curvature[gc * pair_count(nb) + pair_index(i, j, nb)].clone();
                set(
                    nb + gc,
                    i,
                    j,
                    ScalarField::from_expr(Expr::neg(b_expr), Arity::base_only(nb)),
                );
            }
        }
    }

    // Horizontal with vertical: -c^c_{db} A^d_i.
    for i in 0..nb {
        for vb in 0..d {
            for gc in 0..d {
                let mut acc = Expr::num(0.0);
                for vd in 0..d {
                    let coeff = cval(gc, vd, vb);
                    if coeff != 0.0 {
                        let a_expr = data.connection[vd * nb + i].clone();
                        acc = Expr::add(acc, Expr::mul(Expr::num(-coeff), a_expr));
                    }
                }
                if !acc.is_zero() {
                    set(
                        nb + gc,
                        i,
                        nb + vb,
                        ScalarField::from_expr(acc, Arity::base_only(nb)),
                    );
                }
            }
        }
    }

    // Vertical pair: the algebra bracket.
    for va in 0..d {
        for vb in va + 1..d {
            for gc in 0..d {
                let coeff = cval(gc, va, vb);
                if coeff != 0.0 {
                    set(
                        nb + gc,
                        nb + va,
                        nb + vb,
                        ScalarField::from_expr(Expr::num(coeff), Arity::base_only(nb)),
                    );
                }
            }
        }
    }

    AlgebroidModel::validated(nb, m, anchor, structure, label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, ExprContext};

    #[test]
    fn tangent_bundle_anchor_is_identity() {
        let model = tangent_bundle(2).unwrap();
        let rho = model.anchor_matrix(&[0.3, -0.8]).unwrap();
        assert_eq!(rho, Mat::identity(2));
        let c = model.structure_tensor(&[0.3, -0.8]).unwrap();
        assert_eq!(c.max_abs(), 0.0);
    }

    #[test]
    fn lie_algebra_anchor_is_empty() {
        let model = so3();
        assert_eq!(model.n(), 0);
        assert_eq!(model.m(), 3);
        let rho = model.anchor_matrix(&[]).unwrap();
        assert_eq!(rho.rows(), 0);
        assert_eq!(rho.cols(), 3);
    }

    #[test]
    fn so3_structure_matches_matrix_commutators() {
        // Oracle: commutators of the standard so(3) basis (L_a)_{bc} = -eps_{a b c}.
        let eps = |a: usize, b: usize, c: usize| -> f64 {
            match (a, b, c) {
                (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
                (1, 0, 2) | (2, 1, 0) | (0, 2, 1) => -1.0,
                _ => 0.0,
            }
        };
        let basis: Vec<Vec<f64>> = (0..3)
            .map(|a| {
                let mut l = vec![0.0; 9];
                for b in 0..3 {
                    for c in 0..3 {
                        l[b * 3 + c] = -eps(a, b, c);
                    }
                }
                l
            })
            .collect();
        let matmul = |x: &[f64], y: &[f64]| -> Vec<f64> {
            let mut z = vec![0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        z[i * 3 + j] += x[i * 3 + k] * y[k * 3 + j];
                    }
                }
            }
            z
        };

        let model = so3();
        let c = model.structure_tensor(&[]).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let ab = matmul(&basis[a], &basis[b]);
                let ba = matmul(&basis[b], &basis[a]);
                // [L_a, L_b] expanded in the basis: entry (g, 2) column picks
                // out the coefficient of L_g via L_g's unique nonzero pattern.
                for g in 0..3 {
                    let mut coeff = 0.0;
                    // Project onto L_g using the Frobenius inner product
                    // (the basis is orthogonal with norm^2 = 2).
                    for k in 0..9 {
                        coeff += (ab[k] - ba[k]) * basis[g][k];
                    }
                    coeff /= 2.0;
                    assert!(
                        (c[(g, a, b)] - coeff).abs() < 1e-14,
                        "C^{}_{}{} = {} but commutator gives {}",
                        g,
                        a,
                        b,
                        c[(g, a, b)],
                        coeff
                    );
                }
            }
        }
    }

    #[test]
    fn action_so3_anchor_column() {
        let model = action_so3_on_r3();
        let rho = model.anchor_matrix(&[1.0, 0.0, 0.0]).unwrap();
        // Column of e3 must be -e3 x (1,0,0) = (0, -1, 0).
        assert_eq!((rho[(0, 2)], rho[(1, 2)], rho[(2, 2)]), (0.0, -1.0, 0.0));
    }

    #[test]
    fn d_e_reduces_to_gradient_on_tq() {
        let model = tangent_bundle(2).unwrap();
        let ctx = ExprContext::base_only(2, &[]);
        let f = ScalarField::from_expr(parse("q1*q2", &ctx).unwrap(), Arity::base_only(2));
        let d = model.d_e_function(&f, &[3.0, 5.0]).unwrap();
        assert_eq!(d, vec![5.0, 3.0]);
    }

    #[test]
    fn d_e_vanishes_for_zero_anchor() {
        let model = so3();
        let f = ScalarField::from_expr(Expr::num(7.0), Arity::base_only(0));
        assert_eq!(model.d_e_function(&f, &[]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn d_e_kills_rotation_invariants() {
        // f = |q|^2 is invariant under rotations, so d^E f = 0 on the
        // so(3) action algebroid; checked at sampled points.
        let model = action_so3_on_r3();
        let ctx = ExprContext::base_only(3, &[]);
        let f = ScalarField::from_expr(
            parse("q1^2 + q2^2 + q3^2", &ctx).unwrap(),
            Arity::base_only(3),
        );
        for q in sample_points(3, 10, 7) {
            let d = model.d_e_function(&f, &q).unwrap();
            for v in d {
                assert!(v.abs() < 1e-13, "residual {} at {:?}", v, q);
            }
        }
    }

    #[test]
    fn d_e_is_linear() {
        let model = action_so3_on_r3();
        let ctx = ExprContext::base_only(3, &[]);
        let f = ScalarField::from_expr(parse("q1^2*q3", &ctx).unwrap(), Arity::base_only(3));
        let g = ScalarField::from_expr(parse("sin(q2)", &ctx).unwrap(), Arity::base_only(3));
        let combo = ScalarField::from_expr(
            parse("2.5*(q1^2*q3) - 1.25*sin(q2)", &ctx).unwrap(),
            Arity::base_only(3),
        );
        for q in sample_points(3, 8, 21) {
            let df = model.d_e_function(&f, &q).unwrap();
            let dg = model.d_e_function(&g, &q).unwrap();
            let dc = model.d_e_function(&combo, &q).unwrap();
            for a in 0..3 {
                assert!((dc[a] - (2.5 * df[a] - 1.25 * dg[a])).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn structure_residuals_vanish_for_builtins() {
        for model in [tangent_bundle(3).unwrap(), so3(), action_so3_on_r3()] {
            for q in sample_points(model.n(), 20, 99) {
                let (jac, anc) = model.structure_residuals(&q).unwrap();
                assert!(jac.max_abs() < 1e-12, "{}", model.label());
                assert!(anc.max_abs() < 1e-12, "{}", model.label());
            }
        }
    }

    #[test]
    fn perturbed_so3_jacobi_residuals_match_exhaustive_loop() {
        // Reference: the raw cyclic sum over a constant tensor.
        let exhaustive = |c: &[f64]| -> (f64, Vec<f64>) {
            let at = |g: usize, a: usize, b: usize| c[(g * 3 + a) * 3 + b];
            let mut all = Vec::new();
            let mut worst: f64 = 0.0;
            for nu in 0..3 {
                for a in 0..3 {
                    for b in 0..3 {
                        for g in 0..3 {
                            let mut acc = 0.0;
                            for (x, y, z) in [(a, b, g), (b, g, a), (g, a, b)] {
                                for mu in 0..3 {
                                    acc += at(nu, x, mu) * at(mu, y, z);
                                }
                            }
                            worst = worst.max(acc.abs());
                            all.push(acc);
                        }
                    }
                }
            }
            (worst, all)
        };
        let residuals_of = |c: &[f64]| {
            let model = AlgebroidModel::from_parts(
                0,
                3,
                Vec::new(),
                constant_entries(0, pack_constants(3, c).unwrap()),
                "so3_perturbed",
            )
            .unwrap();
            model.structure_residuals(&[]).unwrap().0
        };

        // Rescaling C^3_12 to 1.1 (antisymmetry kept) still satisfies the
        // Jacobi identity: every double bracket of distinct basis vectors
        // lands on a repeated bracket. The exhaustive loop confirms it and
        // the model must agree with the loop entry by entry.
        let entry = |g: usize, a: usize, b: usize| (g * 3 + a) * 3 + b;
        let mut scaled = so3_constants();
        scaled[entry(2, 0, 1)] = 1.1;
        scaled[entry(2, 1, 0)] = -1.1;
        let (worst, all) = exhaustive(&scaled);
        let jac = residuals_of(&scaled);
        let mut idx = 0;
        for nu in 0..3 {
            for a in 0..3 {
                for b in 0..3 {
                    for g in 0..3 {
                        assert!((jac[(nu, a, b, g)] - all[idx]).abs() < 1e-14);
                        idx += 1;
                    }
                }
            }
        }
        assert!(
            worst < 1e-14,
            "diagonal rescale keeps Jacobi, got {}",
            worst
        );
        assert!(lie_algebra(3, &scaled, "scaled so3").is_ok());

        // An off-diagonal bump C^1_12 = 0.3 genuinely breaks Jacobi:
        // [[e3, e1], e2] picks up -0.3 e2.
        let mut broken = so3_constants();
        broken[entry(0, 0, 1)] = 0.3;
        broken[entry(0, 1, 0)] = -0.3;
        let (worst, all) = exhaustive(&broken);
        let jac = residuals_of(&broken);
        assert!(
            worst > 0.05,
            "expected a visible Jacobi defect, got {}",
            worst
        );
        assert!(jac.max_abs() > 0.05);
        let mut idx = 0;
        for nu in 0..3 {
            for a in 0..3 {
                for b in 0..3 {
                    for g in 0..3 {
                        assert!((jac[(nu, a, b, g)] - all[idx]).abs() < 1e-14);
                        idx += 1;
                    }
                }
            }
        }

        // And the validating constructor rejects the broken constants.
        assert!(lie_algebra(3, &broken, "bad").is_err());
    }

    #[test]
    fn antisymmetry_is_exact_for_all_builtins() {
        for model in [tangent_bundle(3).unwrap(), so3(), action_so3_on_r3()] {
            for q in sample_points(model.n(), 15, 3) {
                let c = model.structure_tensor(&q).unwrap();
                let m = model.m();
                for g in 0..m {
                    for a in 0..m {
                        for b in 0..m {
                            assert_eq!(c[(g, a, b)] + c[(g, b, a)], 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn tangent_bundle_of_the_line() {
        let model = tangent_bundle(1).unwrap();
        assert_eq!((model.n(), model.m()), (1, 1));
        let rho = model.anchor_matrix(&[0.7]).unwrap();
        assert_eq!(rho[(0, 0)], 1.0);
        assert_eq!(model.structure_tensor(&[0.7]).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn atiyah_with_abelian_algebra_and_flat_connection_is_abelian() {
        // All brackets vanish: zero algebra constants, zero connection,
        // zero curvature.
        let zero = Expr::num(0.0);
        let data = AtiyahData {
            base_dim: 2,
            fiber_dim: 2,
            algebra: vec![0.0; 8],
            connection: vec![zero.clone(); 4],
            curvature: vec![zero; 2],
        };
        let model = atiyah_trivial(&data, "abelian_flat").unwrap();
        assert_eq!((model.n(), model.m()), (2, 4));
        for q in sample_points(2, 8, 5) {
            assert_eq!(model.structure_tensor(&q).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn atiyah_rejects_inconsistent_curvature() {
        // so(3) algebra with the curved test connection but zero declared
        // curvature: the anchor-compatibility residual is nonzero and the
        // constructor must refuse.
        let ctx = crate::expr::ExprContext::base_only(2, &[]);
        let e = |src: &str| crate::expr::parse(src, &ctx).unwrap();
        let zero = Expr::num(0.0);
        let data = AtiyahData {
            base_dim: 2,
            fiber_dim: 3,
            algebra: so3_constants(),
            connection: vec![
                zero.clone(),
                e("q1"),
                zero.clone(),
                zero.clone(),
                e("q2"),
                zero.clone(),
            ],
            curvature: vec![Expr::num(0.0), Expr::num(0.0), Expr::num(0.0)],
        };
        assert!(matches!(
            atiyah_trivial(&data, "bad"),
            Err(CoreError::StructureValidation { .. })
        ));
    }

    #[test]
    fn wrong_dimension_q_is_rejected() {
        let model = tangent_bundle(2).unwrap();
        assert!(model.anchor_matrix(&[1.0]).is_err());
        assert!(model.structure_tensor(&[1.0, 2.0, 3.0]).is_err());
    }
}
