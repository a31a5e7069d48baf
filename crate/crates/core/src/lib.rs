//! Oscillatory integrals `I(λ) = ∫ e^{iλΦ(x)} ψ(x) dx` on the unit ball of ℝ^d (d ≤ 3).
//!
//! The crate is organised bottom-up:
//!
//! * [`symmat`]: dense symmetric matrices, Jacobi eigensolver, `|A|^a` and matrix inequalities.
//! * [`jet`]: truncated multivariate Taylor arithmetic used for exact mixed partials.
//! * [`phasekit`]: phase and amplitude models, sampled size constants (`𝒫_r`, `𝒜_r`, `L*`, `μ`).
//! * [`oracle`]: direct quadrature of `I(λ)`, the reference for every other route.
//! * [`wavepacket`]: uniform `λ^{-1/2}`-lattice packet decomposition and Fourier resummation.
//! * [`anisocover`]: Hessian-scaled ellipsoidal packets and their greedy separated cover.
//! * [`harness`]: λ-sweeps, decay fits, bound tracking and report files.

// `!(x > 0.0)` style guards are deliberate: they reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anisocover;
pub mod error;
pub mod harness;
pub mod jet;
pub mod oracle;
pub mod phasekit;
pub mod sum;
pub mod symmat;
pub mod wavepacket;

pub use num_complex::Complex64;

pub use error::{Error, Result};
pub use oracle::{QuadratureConfig, QuadratureResult};
pub use phasekit::{AmplitudeFamily, PhaseConstants, PhaseModel};
pub use symmat::{EigenPair, SymMatrix};
