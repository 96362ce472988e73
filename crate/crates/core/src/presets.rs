//! Named noise presets shared by the test suites and the experiment runner.

use crate::error::{Error, Result};
use crate::simulator::NoiseModel;

/// No noise at all.
pub fn noiseless() -> NoiseModel {
    NoiseModel::noiseless()
}

/// Lossy-device preset: a stochastic-error budget dominated by a global
/// depolarizing envelope, with small local gate, decay, dephasing, and
/// readout contributions on top. The survival constant is calibrated so the
/// ten-orbital identity echo returns with probability ≈ 0.12 at a
/// representative optimized angle set.
pub fn device_like() -> NoiseModel {
    NoiseModel {
        two_qubit_depolarizing: 0.0015,
        single_qubit_depolarizing: 0.0002,
        amplitude_damping: 0.0008,
        dephasing: 0.0008,
        background_field: 0.0,
        readout_01: 0.008,
        readout_10: 0.008,
        global_depolarizing_survival: 0.152,
    }
}

/// Look a preset up by its runner-facing name.
pub fn by_name(name: &str) -> Result<NoiseModel> {
    match name {
        "noiseless" => Ok(noiseless()),
        "device" | "device-like" => Ok(device_like()),
        other => Err(Error::invalid(format!(
            "unknown noise preset '{other}' (expected 'noiseless' or 'device')"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_noise_models() {
        for name in ["noiseless", "device", "device-like"] {
            by_name(name).unwrap().validate().unwrap();
        }
        assert!(by_name("loud").is_err());
    }

    #[test]
    fn device_preset_is_mostly_global() {
        let d = device_like();
        assert!(d.global_depolarizing_survival < 0.5);
        assert!(d.two_qubit_depolarizing < 0.01);
        assert!(!d.is_coherent_only());
    }
}
