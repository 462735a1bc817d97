//! Matrix representations on the truncated space `spin₁ ⊗ … ⊗ spin_N ⊗ cavity`.
//!
//! Spin `k` (0-based here) is tensor factor `k`, the cavity is the last factor.
//! Each spin uses the basis `|↓⟩ = 0`, `|↑⟩ = 1`, so `σ^z = diag(−1, 1)` and
//! `σ⁻ = |↓⟩⟨↑|`. Photon states run over `|0⟩ … |F−1⟩`.
//!
//! Density matrices are vectorized row by row: `ρ_ij` sits at `i·dim + j`.
//! With that ordering `vec(AρB) = (A ⊗ Bᵀ) vec(ρ)`, which gives the
//! Liouvillian the form `−i(H⊗I − I⊗Hᵀ) + Σ γ (x⊗x* − ½x†x⊗I − ½I⊗(x†x)ᵀ)`.

use nalgebra::DMatrix;

use crate::linalg::{hermitian_eigenvalues, min_hermitian_eigenvalue, CsrMatrix};
use crate::model::{effective_detuning, SpinClasses, SystemParams};
use crate::{Error, Result, C64};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Dimensions of the truncated Hilbert space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HilbertSpec {
    pub fock_cutoff: usize,
    pub n_spins: usize,
    pub dim: usize,
}

impl HilbertSpec {
    pub fn new(fock_cutoff: usize, n_spins: usize) -> Result<Self> {
        if fock_cutoff < 2 {
            return Err(Error::Argument(format!("Fock cutoff must be >= 2, got {fock_cutoff}")));
        }
        if n_spins > 16 {
            return Err(Error::Argument(format!("{n_spins} spins is beyond dense reach")));
        }
        Ok(HilbertSpec { fock_cutoff, n_spins, dim: fock_cutoff << n_spins })
    }

    /// Dimension of the spin register, 2^N.
    pub fn spin_dim(&self) -> usize {
        1 << self.n_spins
    }

    /// Global index of spin configuration `bits` (spin 0 is the most
    /// significant bit) and photon number `n`.
    pub fn index(&self, bits: usize, n: usize) -> usize {
        bits * self.fock_cutoff + n
    }

    /// Occupation (0 = down, 1 = up) of spin `k` in global state `i`.
    pub fn spin_bit(&self, i: usize, k: usize) -> usize {
        (i / self.fock_cutoff >> (self.n_spins - 1 - k)) & 1
    }

    pub fn photon_number(&self, i: usize) -> usize {
        i % self.fock_cutoff
    }
}

/// Frame the Hamiltonian is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// Frame rotating at half the drive frequency, with the explicit
    /// two-photon drive.
    Lab,
    /// Bogoliubov-transformed frame where the drive is absorbed.
    Squeezed,
}

/// Operator on a [`HilbertSpec`], stored sparse.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub matrix: CsrMatrix,
    pub basis: HilbertSpec,
}

impl OperatorMatrix {
    pub fn new(matrix: CsrMatrix, basis: HilbertSpec) -> Result<Self> {
        if matrix.nrows() != basis.dim || matrix.ncols() != basis.dim {
            return Err(Error::Argument(format!(
                "matrix is {}x{} but basis dimension is {}",
                matrix.nrows(),
                matrix.ncols(),
                basis.dim
            )));
        }
        Ok(OperatorMatrix { matrix, basis })
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.matrix.hermiticity_defect()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        self.matrix.to_dense()
    }

    pub fn adjoint(&self) -> Self {
        OperatorMatrix { matrix: self.matrix.adjoint(), basis: self.basis }
    }
}

// Single-mode and single-spin building blocks.

pub fn destroy(fock_cutoff: usize) -> CsrMatrix {
    let triplets = (1..fock_cutoff).map(|n| (n - 1, n, c((n as f64).sqrt()))).collect();
    CsrMatrix::from_triplets(fock_cutoff, fock_cutoff, triplets)
}

pub fn number(fock_cutoff: usize) -> CsrMatrix {
    let triplets = (1..fock_cutoff).map(|n| (n, n, c(n as f64))).collect();
    CsrMatrix::from_triplets(fock_cutoff, fock_cutoff, triplets)
}

pub fn sigma_minus() -> CsrMatrix {
    CsrMatrix::from_triplets(2, 2, vec![(0, 1, c(1.0))])
}

pub fn sigma_z() -> CsrMatrix {
    CsrMatrix::from_triplets(2, 2, vec![(0, 0, c(-1.0)), (1, 1, c(1.0))])
}

/// Cavity operator lifted to the full space.
pub fn on_cavity(spec: &HilbertSpec, op: &CsrMatrix) -> OperatorMatrix {
    OperatorMatrix { matrix: CsrMatrix::identity(spec.spin_dim()).kron(op), basis: *spec }
}

/// Single-spin operator on spin `k` lifted to the full space.
pub fn on_spin(spec: &HilbertSpec, k: usize, op: &CsrMatrix) -> OperatorMatrix {
    assert!(k < spec.n_spins, "spin index {k} out of range");
    let left = CsrMatrix::identity(1 << k);
    let right = CsrMatrix::identity((1 << (spec.n_spins - k - 1)) * spec.fock_cutoff);
    OperatorMatrix { matrix: left.kron(op).kron(&right), basis: *spec }
}

fn check_classes(spec: &HilbertSpec, classes: &SpinClasses) -> Result<()> {
    if classes.len() != spec.n_spins {
        return Err(Error::Argument(format!(
            "{} spin classes supplied for {} simulated spins",
            classes.len(),
            spec.n_spins
        )));
    }
    Ok(())
}

/// Cavity-only Hamiltonian on the F-dimensional mode space.
fn cavity_hamiltonian(fock: usize, params: &SystemParams, frame: Frame, r: f64) -> CsrMatrix {
    let a = destroy(fock);
    let n = number(fock);
    match frame {
        Frame::Lab => {
            let a2 = a.matmul(&a);
            let pair = a2.add(&a2.adjoint());
            n.scale(c(params.delta_c)).add_scaled(&pair, c(-0.5 * params.eta))
        }
        Frame::Squeezed => n.scale(c(effective_detuning(params.delta_c, r))),
    }
}

/// Spin-k Hamiltonian including its cavity coupling, on `spin ⊗ cavity`
/// given the spin and cavity operators already lifted to a common space.
fn spin_hamiltonian(
    sm: &CsrMatrix,
    sz: &CsrMatrix,
    a: &CsrMatrix,
    detuning: f64,
    g: f64,
    frame: Frame,
    r: f64,
) -> CsrMatrix {
    let sp = sm.adjoint();
    let ad = a.adjoint();
    let free = sz.scale(c(0.5 * detuning));
    let coupling = match frame {
        Frame::Lab => sm.matmul(&ad).add(&sp.matmul(a)).scale(c(g)),
        Frame::Squeezed => {
            let x = a.add(&ad).matmul(&sm.add(&sp));
            let y = a.sub(&ad).matmul(&sm.sub(&sp));
            x.scale(c(0.5 * g * r.exp())).add_scaled(&y, c(-0.5 * g * (-r).exp()))
        }
    };
    free.add(&coupling)
}

fn build_hamiltonian(
    spec: &HilbertSpec,
    params: &SystemParams,
    classes: &SpinClasses,
    frame: Frame,
    r: f64,
) -> Result<OperatorMatrix> {
    check_classes(spec, classes)?;
    let mut h = on_cavity(spec, &cavity_hamiltonian(spec.fock_cutoff, params, frame, r)).matrix;
    let a = on_cavity(spec, &destroy(spec.fock_cutoff)).matrix;
    for (k, class) in classes.classes.iter().enumerate() {
        let sm = on_spin(spec, k, &sigma_minus()).matrix;
        let sz = on_spin(spec, k, &sigma_z()).matrix;
        h = h.add(&spin_hamiltonian(&sm, &sz, &a, class.detuning, class.coupling, frame, r));
    }
    OperatorMatrix::new(h, *spec)
}

/// Driven Tavis-Cummings Hamiltonian in the frame rotating at half the drive
/// frequency:
/// `½ΣΔₖσₖᶻ + Δc a†a + Σgₖ(σₖ⁻a† + σₖ⁺a) − (η/2)(a² + a†²)`.
pub fn build_h0(spec: &HilbertSpec, params: &SystemParams, classes: &SpinClasses) -> Result<OperatorMatrix> {
    build_hamiltonian(spec, params, classes, Frame::Lab, 0.0)
}

/// Squeezed-frame Hamiltonian
/// `Δ̃c a†a + ½Σ{Δₖσₖᶻ + gₖeʳ(a+a†)(σₖ⁻+σₖ⁺) − gₖe⁻ʳ(a−a†)(σₖ⁻−σₖ⁺)}`.
pub fn build_hsq(
    spec: &HilbertSpec,
    params: &SystemParams,
    classes: &SpinClasses,
    r: f64,
) -> Result<OperatorMatrix> {
    build_hamiltonian(spec, params, classes, Frame::Squeezed, r)
}

// Superoperators in the row-major convention.

fn commutator_super(h: &CsrMatrix) -> CsrMatrix {
    let id = CsrMatrix::identity(h.nrows());
    h.kron(&id).sub(&id.kron(&h.transpose())).scale(C64::new(0.0, -1.0))
}

fn dissipator_super(x: &CsrMatrix) -> CsrMatrix {
    let id = CsrMatrix::identity(x.nrows());
    let xdx = x.adjoint().matmul(x);
    x.kron(&x.conj())
        .add_scaled(&xdx.kron(&id), c(-0.5))
        .add_scaled(&id.kron(&xdx.transpose()), c(-0.5))
}

/// Vectorized Lindblad dissipator `x⊗x* − ½x†x⊗I − ½I⊗(x†x)ᵀ`.
pub fn dissipator(spec: &HilbertSpec, jump: &OperatorMatrix) -> Result<CsrMatrix> {
    if jump.basis != *spec {
        return Err(Error::Argument("jump operator lives on a different basis".into()));
    }
    Ok(dissipator_super(&jump.matrix))
}

/// Superoperator restricted to the `spin k ⊗ cavity` factors (or the cavity
/// alone when there are no spins).
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTerm {
    pub spin: Option<usize>,
    /// Hilbert dimension of the support (2F, or F for the bare cavity).
    pub local_dim: usize,
    /// Generator on the vectorized support, `local_dim² × local_dim²`.
    pub generator: DMatrix<C64>,
}

impl LocalTerm {
    /// Lift to the full vectorized space.
    pub fn embed(&self, spec: &HilbertSpec) -> CsrMatrix {
        let dim = spec.dim;
        let ld = self.local_dim;
        let rest = dim / ld;
        let lift = |rest_idx: usize, local: usize| -> usize {
            match self.spin {
                None => local,
                Some(k) => compose_index(spec, k, rest_idx, local),
            }
        };
        let mut triplets = Vec::new();
        let g = &self.generator;
        for ri in 0..rest {
            for rj in 0..rest {
                for p in 0..ld * ld {
                    let (pi, pj) = (p / ld, p % ld);
                    let row = lift(ri, pi) * dim + lift(rj, pj);
                    for q in 0..ld * ld {
                        let v = g[(p, q)];
                        if v != C64::new(0.0, 0.0) {
                            let (qi, qj) = (q / ld, q % ld);
                            triplets.push((row, lift(ri, qi) * dim + lift(rj, qj), v));
                        }
                    }
                }
            }
        }
        CsrMatrix::from_triplets(dim * dim, dim * dim, triplets)
    }
}

/// Global index from the state of spin `k` plus cavity (`local = s·F + n`)
/// and the configuration of the other spins (`rest`, an (N−1)-bit number).
pub(crate) fn compose_index(spec: &HilbertSpec, k: usize, rest: usize, local: usize) -> usize {
    let f = spec.fock_cutoff;
    let (s, n) = (local / f, local % f);
    let low_bits = spec.n_spins - 1 - k;
    let low = rest & ((1 << low_bits) - 1);
    let high = rest >> low_bits;
    let bits = (((high << 1) | s) << low_bits) | low;
    spec.index(bits, n)
}

/// Vectorized generator of the master equation together with its split into
/// per-spin pieces for Trotter stepping.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    pub matrix: CsrMatrix,
    /// `L_k` supported on spin k and the cavity; `Σ L_k = matrix`.
    pub terms: Vec<LocalTerm>,
    pub hamiltonian: OperatorMatrix,
    pub basis: HilbertSpec,
}

/// Assemble `−i(H⊗I − I⊗Hᵀ) + κ𝓛[a] + Σₖ(γ_h 𝓛[σₖ⁻] + γ_p 𝓛[σₖᶻ])`.
///
/// The Hamiltonian is `H₀` in the lab frame and `H_sq(r)` in the squeezed
/// frame; jump operators are the untransformed `a`, `σ⁻`, `σᶻ` in both. The
/// per-spin decomposition gives every `L_k` its own spin terms plus a `1/N`
/// share of the cavity Hamiltonian and cavity loss.
pub fn build_liouvillian(
    spec: &HilbertSpec,
    params: &SystemParams,
    classes: &SpinClasses,
    frame: Frame,
    r: f64,
) -> Result<Liouvillian> {
    let hamiltonian = build_hamiltonian(spec, params, classes, frame, r)?;
    let mut matrix = commutator_super(&hamiltonian.matrix);
    let a = on_cavity(spec, &destroy(spec.fock_cutoff));
    if params.kappa != 0.0 {
        matrix = matrix.add_scaled(&dissipator(spec, &a)?, c(params.kappa));
    }
    for k in 0..spec.n_spins {
        if params.gamma_h != 0.0 {
            matrix = matrix.add_scaled(&dissipator(spec, &on_spin(spec, k, &sigma_minus()))?, c(params.gamma_h));
        }
        if params.gamma_p != 0.0 {
            matrix = matrix.add_scaled(&dissipator(spec, &on_spin(spec, k, &sigma_z()))?, c(params.gamma_p));
        }
    }
    let terms = local_terms(spec, params, classes, frame, r);
    Ok(Liouvillian { matrix, terms, hamiltonian, basis: *spec })
}

fn local_terms(
    spec: &HilbertSpec,
    params: &SystemParams,
    classes: &SpinClasses,
    frame: Frame,
    r: f64,
) -> Vec<LocalTerm> {
    let f = spec.fock_cutoff;
    let h_cav = cavity_hamiltonian(f, params, frame, r);
    let a = destroy(f);
    if spec.n_spins == 0 {
        let gen = commutator_super(&h_cav).add_scaled(&dissipator_super(&a), c(params.kappa));
        return vec![LocalTerm { spin: None, local_dim: f, generator: gen.to_dense() }];
    }
    let share = 1.0 / spec.n_spins as f64;
    let id2 = CsrMatrix::identity(2);
    let idf = CsrMatrix::identity(f);
    let a_l = id2.kron(&a);
    let sm_l = sigma_minus().kron(&idf);
    let sz_l = sigma_z().kron(&idf);
    let cav_l = id2.kron(&h_cav);
    classes
        .classes
        .iter()
        .enumerate()
        .map(|(k, class)| {
            let h = spin_hamiltonian(&sm_l, &sz_l, &a_l, class.detuning, class.coupling, frame, r)
                .add_scaled(&cav_l, c(share));
            let gen = commutator_super(&h)
                .add_scaled(&dissipator_super(&a_l), c(share * params.kappa))
                .add_scaled(&dissipator_super(&sm_l), c(params.gamma_h))
                .add_scaled(&dissipator_super(&sz_l), c(params.gamma_p));
            LocalTerm { spin: Some(k), local_dim: 2 * f, generator: gen.to_dense() }
        })
        .collect()
}

/// Total excitation number `a†a + ½Σσₖᶻ`.
pub fn excitation_number(spec: &HilbertSpec) -> OperatorMatrix {
    let mut m = on_cavity(spec, &number(spec.fock_cutoff)).matrix;
    for k in 0..spec.n_spins {
        m = m.add_scaled(&on_spin(spec, k, &sigma_z()).matrix, c(0.5));
    }
    OperatorMatrix { matrix: m, basis: *spec }
}

impl Liouvillian {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Move to the frame rotating at `omega` times the excitation number.
    ///
    /// Exact only when the Hamiltonian conserves excitations (no drive and
    /// no counter-rotating coupling); otherwise an argument error is
    /// returned. The dissipators are covariant under this rotation, so the
    /// generator simply loses `−i ω [N, ·]`.
    pub fn co_rotating(&self, omega: f64) -> Result<Liouvillian> {
        let spec = self.basis;
        let n_exc = excitation_number(&spec).matrix;
        let h = &self.hamiltonian.matrix;
        let comm = h.matmul(&n_exc).sub(&n_exc.matmul(h));
        let scale = h.max_abs().max(1.0);
        if comm.max_abs() > 1e-12 * scale {
            return Err(Error::Argument(format!(
                "Hamiltonian does not conserve excitations (‖[H, N]‖ = {:e}); rotating frame would be time dependent",
                comm.max_abs()
            )));
        }
        let hamiltonian = OperatorMatrix { matrix: h.add_scaled(&n_exc, c(-omega)), basis: spec };
        let matrix = self.matrix.add_scaled(&commutator_super(&n_exc), c(-omega));
        let f = spec.fock_cutoff;
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let local_n = match t.spin {
                    None => number(f),
                    Some(_) => {
                        let share = 1.0 / spec.n_spins as f64;
                        CsrMatrix::identity(2)
                            .kron(&number(f))
                            .scale(c(share))
                            .add_scaled(&sigma_z().kron(&CsrMatrix::identity(f)), c(0.5))
                    }
                };
                let shift = commutator_super(&local_n).to_dense() * c(-omega);
                LocalTerm { spin: t.spin, local_dim: t.local_dim, generator: &t.generator + shift }
            })
            .collect();
        Ok(Liouvillian { matrix, terms, hamiltonian, basis: spec })
    }
}

/// Row-major vectorized density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySuperket {
    pub data: Vec<C64>,
    pub basis: HilbertSpec,
}

impl DensitySuperket {
    pub fn from_density(rho: &DMatrix<C64>, basis: HilbertSpec) -> Result<Self> {
        if rho.nrows() != basis.dim || rho.ncols() != basis.dim {
            return Err(Error::Argument(format!(
                "density matrix is {}x{}, basis dimension {}",
                rho.nrows(),
                rho.ncols(),
                basis.dim
            )));
        }
        let d = basis.dim;
        let data = (0..d * d).map(|p| rho[(p / d, p % d)]).collect();
        Ok(DensitySuperket { data, basis })
    }

    /// `|ψ⟩⟨ψ|` for a state vector on the full space (normalized here).
    pub fn pure(psi: &[C64], basis: HilbertSpec) -> Result<Self> {
        if psi.len() != basis.dim {
            return Err(Error::Argument("state vector length does not match basis".into()));
        }
        let norm = psi.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Argument("zero state vector".into()));
        }
        let v = nalgebra::DVector::from_iterator(psi.len(), psi.iter().map(|x| x / norm));
        Self::from_density(&(&v * v.adjoint()), basis)
    }

    /// `ρ_spins ⊗ ρ_cavity` in the factor order of the basis.
    pub fn product(spins: &DMatrix<C64>, cavity: &DMatrix<C64>, basis: HilbertSpec) -> Result<Self> {
        if spins.nrows() != basis.spin_dim() || cavity.nrows() != basis.fock_cutoff {
            return Err(Error::Argument("factor dimensions do not match basis".into()));
        }
        Self::from_density(&spins.kronecker(cavity), basis)
    }

    /// All spins down, cavity in the pure state `psi` (length ≤ F, padded).
    pub fn spins_down_with_cavity(psi: &[C64], basis: HilbertSpec) -> Result<Self> {
        if psi.len() > basis.fock_cutoff {
            return Err(Error::Argument("cavity state exceeds the Fock cutoff".into()));
        }
        let mut full = vec![C64::new(0.0, 0.0); basis.dim];
        full[..psi.len()].copy_from_slice(psi);
        Self::pure(&full, basis)
    }

    pub fn to_density(&self) -> DMatrix<C64> {
        let d = self.basis.dim;
        DMatrix::from_fn(d, d, |i, j| self.data[i * d + j])
    }

    pub fn trace(&self) -> C64 {
        let d = self.basis.dim;
        (0..d).map(|i| self.data[i * d + i]).sum()
    }

    /// ‖ρ − ρ†‖_max
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.basis.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.data[i * d + j] - self.data[j * d + i].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_hermitian_eigenvalue(&self.to_density())
    }

    /// Population of photon number `n` (summed over spins).
    pub fn photon_population(&self, n: usize) -> f64 {
        let d = self.basis.dim;
        (0..d)
            .filter(|&i| self.basis.photon_number(i) == n)
            .map(|i| self.data[i * d + i].re)
            .sum()
    }

    /// Trace distance ½‖ρ − σ‖₁.
    pub fn trace_distance(&self, other: &DensitySuperket) -> f64 {
        let diff = self.to_density() - other.to_density();
        0.5 * hermitian_eigenvalues(&diff).iter().map(|x| x.abs()).sum::<f64>()
    }
}
