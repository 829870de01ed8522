//! Offline learners: pessimistic tabular and linear estimators and their
//! plug-in (non-pessimistic) counterparts.
//!
//! Learners receive an [`InstanceMeta`](crate::instance::InstanceMeta) or a
//! [`LinearMeta`], neither of which exposes the true rewards.

mod linear;
mod tabular;

pub use linear::{
    confidence_radius, d2_divergence, fit_fkl_pcb_linear, fit_linear, fkl_pcb_linear,
    greedy_linear, least_squares, population_gram, D2Oracle, LinearBanditInstance, LinearMeta,
    LinearPcbConfig, LinearPessimisticEstimate, RawLinearInstance, SymmetricPinv, PINV_RTOL,
    RANGE_RTOL,
};
pub use tabular::{
    count_event_holds, fit_fkl_pcb_tabular, fit_tabular, fkl_pcb_tabular, greedy_tabular,
    tabular_bonus, PessimisticEstimate,
};
