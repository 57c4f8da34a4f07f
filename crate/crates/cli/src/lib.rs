//! Command-line harness over the uplift modeling core: data generation,
//! training, evaluation, scoring, weight-model training, and the policy
//! simulation.

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod requests;

use hmum_core::data::DataError;
use hmum_core::ddm::DdmError;
use hmum_core::hum::HumError;
use hmum_core::metrics::MetricError;
use hmum_core::nn::NnError;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Maps an error chain onto the process exit code: 2 for data problems,
/// 3 for numerical ones.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<NnError>() {
            return match e {
                NnError::NonFinite { .. } => EXIT_NUMERICAL,
                _ => EXIT_DATA,
            };
        }
        if let Some(e) = cause.downcast_ref::<HumError>() {
            return match e {
                HumError::Diverged { .. } | HumError::Nn(NnError::NonFinite { .. }) => EXIT_NUMERICAL,
                _ => EXIT_DATA,
            };
        }
        if let Some(e) = cause.downcast_ref::<DdmError>() {
            return match e {
                DdmError::Diverged { .. }
                | DdmError::DegenerateControl { .. }
                | DdmError::Nn(NnError::NonFinite { .. }) => EXIT_NUMERICAL,
                _ => EXIT_DATA,
            };
        }
        if cause.downcast_ref::<DataError>().is_some()
            || cause.downcast_ref::<MetricError>().is_some()
            || cause.downcast_ref::<std::io::Error>().is_some()
        {
            return EXIT_DATA;
        }
    }
    EXIT_DATA
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divergence_maps_to_numerical() {
        let err = anyhow::Error::new(HumError::Diverged { epoch: 1, loss: f64::NAN });
        assert_eq!(exit_code(&err), EXIT_NUMERICAL);
    }

    #[test]
    fn parse_errors_map_to_data() {
        let err = anyhow::Error::new(DataError::Parse {
            row: 3,
            detail: "bad".into(),
        });
        assert_eq!(exit_code(&err), EXIT_DATA);
    }

    #[test]
    fn degenerate_control_maps_to_numerical() {
        let err = anyhow::Error::new(DdmError::DegenerateControl {
            user_id: "u".into(),
            value: 0.0,
        });
        assert_eq!(exit_code(&err), EXIT_NUMERICAL);
    }
}
