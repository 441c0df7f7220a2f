//! Answer-type-modification types: subtyping, the checker and its
//! derivations.

pub mod check;
pub mod deriv;
pub mod json;
pub mod subtype;
pub mod validate;

pub use check::{check_atm, check_atm_program, AtmError};
pub use deriv::{AtmEnv, Rule, Subject, TypeDeriv};
pub use json::{deriv_to_json, sub_deriv_to_json};
pub use subtype::{
    compose, is_subtype_comp, is_subtype_value, subtype, subtype_comp, subtype_value, validate_sub, AtmType, SubDeriv,
    SubRule,
};
pub use validate::validate_derivation;
