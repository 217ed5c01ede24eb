//! Physical model of the fiber channel: attenuation, spontaneous Raman
//! scattering (SpRS) noise, chromatic dispersion and detector dead time.
//!
//! Attenuation is given in dB/km but every exponential below works in
//! natural units, `alpha_np = ln(10) * atten_db_per_km / 10` per km.
//!
//! SpRS coefficients are *detected* noise rates (counts/s per mW of launch
//! power per km of fiber, in the loss-free limit). They already contain the
//! detector efficiency and filter passband of the instrument they were
//! measured with; see [`crate::coexistence::CoexistenceScenario::sprs_scale`]
//! for how they are carried over to other detectors.

use std::f64::consts::LN_10;

use thiserror::Error;

/// Conversion from a Gaussian FWHM to its standard deviation, `2*sqrt(2 ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{field} = {value} is outside its physical domain ({domain})")]
    OutOfDomain {
        field: &'static str,
        value: f64,
        domain: &'static str,
    },
}

pub(crate) fn check(field: &'static str, value: f64, ok: bool, domain: &'static str) -> Result<(), ModelError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::OutOfDomain { field, value, domain })
    }
}

pub(crate) fn non_negative(field: &'static str, value: f64) -> Result<(), ModelError> {
    check(field, value, value >= 0.0, ">= 0")
}

pub(crate) fn unit_interval(field: &'static str, value: f64) -> Result<(), ModelError> {
    check(field, value, (0.0..=1.0).contains(&value), "[0, 1]")
}

/// Fiber span between the two sites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberLink {
    pub length_km: f64,
    pub atten_db_per_km: f64,
    pub gvd_ps_nm_km: f64,
    /// Forward (co-propagating) SpRS coefficient, cps / (mW km).
    pub rho_fwd_cps_mw_km: f64,
    /// Backward (counter-propagating) SpRS coefficient, cps / (mW km).
    pub rho_bwd_cps_mw_km: f64,
    /// Lumped WDM / circulator loss per direction.
    pub insertion_loss_db: f64,
}

impl FiberLink {
    pub fn validate(&self) -> Result<(), ModelError> {
        non_negative("length_km", self.length_km)?;
        non_negative("atten_db_per_km", self.atten_db_per_km)?;
        check("gvd_ps_nm_km", self.gvd_ps_nm_km, true, "finite")?;
        non_negative("rho_fwd_cps_mw_km", self.rho_fwd_cps_mw_km)?;
        non_negative("rho_bwd_cps_mw_km", self.rho_bwd_cps_mw_km)?;
        non_negative("insertion_loss_db", self.insertion_loss_db)
    }

    /// Attenuation coefficient in nepers per km.
    pub fn alpha_np_per_km(&self) -> f64 {
        LN_10 * self.atten_db_per_km / 10.0
    }

    pub fn total_loss_db(&self) -> f64 {
        self.atten_db_per_km * self.length_km + self.insertion_loss_db
    }

    pub fn with_length(self, length_km: f64) -> Self {
        Self { length_km, ..self }
    }

    /// Forward effective length `L * exp(-alpha L)`: noise born at `z` from a
    /// pump of strength `exp(-alpha z)` and attenuated over the remaining
    /// `L - z`, integrated over the span.
    pub fn forward_effective_length_km(&self) -> f64 {
        self.length_km * (-self.alpha_np_per_km() * self.length_km).exp()
    }

    /// Backward effective length `(1 - exp(-2 alpha L)) / (2 alpha)`, which
    /// tends to `L` as `alpha -> 0`.
    pub fn backward_effective_length_km(&self) -> f64 {
        let two_a = 2.0 * self.alpha_np_per_km();
        let x = two_a * self.length_km;
        if x < 1e-8 {
            // series of (1 - e^-x)/x, accurate far beyond this cut
            self.length_km * (1.0 - x / 2.0 + x * x / 6.0)
        } else {
            -(-x).exp_m1() / two_a
        }
    }
}

/// Classical carrier sharing the fiber. Directions are relative to the
/// A -> B quantum signal: `power_fwd_mw` travels A -> B, `power_bwd_mw`
/// travels B -> A.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalCarrier {
    pub power_fwd_mw: f64,
    pub power_bwd_mw: f64,
    pub wavelength_nm: f64,
}

impl ClassicalCarrier {
    pub fn validate(&self) -> Result<(), ModelError> {
        non_negative("power_fwd_mw", self.power_fwd_mw)?;
        non_negative("power_bwd_mw", self.power_bwd_mw)?;
        check("carrier_wavelength_nm", self.wavelength_nm, self.wavelength_nm > 0.0, "> 0")
    }

    /// Rescales the carrier so the forward launch power equals `power_mw`,
    /// keeping the forward/backward split. A carrier with only backward
    /// light has that leg set instead; an all-dark carrier becomes
    /// forward-only.
    pub fn with_power(self, power_mw: f64) -> Self {
        let (fwd, bwd) = if self.power_fwd_mw > 0.0 {
            let k = power_mw / self.power_fwd_mw;
            (power_mw, self.power_bwd_mw * k)
        } else if self.power_bwd_mw > 0.0 {
            (0.0, power_mw)
        } else {
            (power_mw, 0.0)
        };
        Self {
            power_fwd_mw: fwd,
            power_bwd_mw: bwd,
            ..self
        }
    }

    /// The same light seen from the B -> A quantum channel.
    pub fn reversed(self) -> Self {
        Self {
            power_fwd_mw: self.power_bwd_mw,
            power_bwd_mw: self.power_fwd_mw,
            ..self
        }
    }
}

/// Single-photon detector. Jitter is a Gaussian 1-sigma; dead time is
/// non-paralyzable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    pub efficiency: f64,
    pub dark_rate_cps: f64,
    pub jitter_sigma_ps: f64,
    pub dead_time_ns: f64,
}

impl DetectorModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        unit_interval("efficiency", self.efficiency)?;
        non_negative("dark_rate_cps", self.dark_rate_cps)?;
        non_negative("jitter_sigma_ps", self.jitter_sigma_ps)?;
        non_negative("dead_time_ns", self.dead_time_ns)
    }

    pub fn dead_time_s(&self) -> f64 {
        self.dead_time_ns * 1e-9
    }

    /// Fraction of incident photons registered at total input `rate_cps`.
    pub fn live_fraction(&self, rate_cps: f64) -> f64 {
        1.0 / (1.0 + rate_cps * self.dead_time_s())
    }
}

/// End-to-end power transmittance of the link including insertion losses.
pub fn channel_transmittance(link: &FiberLink) -> f64 {
    10f64.powf(-link.total_loss_db() / 10.0)
}

/// Detected forward SpRS noise rate in counts/s, before any rescaling for
/// a different detector.
pub fn forward_sprs_rate(link: &FiberLink, carrier: &ClassicalCarrier) -> f64 {
    link.rho_fwd_cps_mw_km * carrier.power_fwd_mw * link.forward_effective_length_km()
}

/// Detected backward SpRS noise rate in counts/s. Saturates at
/// `rho_b * P / (2 alpha)` for long spans.
pub fn backward_sprs_rate(link: &FiberLink, carrier: &ClassicalCarrier) -> f64 {
    link.rho_bwd_cps_mw_km * carrier.power_bwd_mw * link.backward_effective_length_km()
}

/// FWHM temporal broadening `|GVD| * bandwidth * L` in ps.
pub fn dispersion_broadening(link: &FiberLink, fwhm_bandwidth_nm: f64) -> f64 {
    link.gvd_ps_nm_km.abs() * fwhm_bandwidth_nm.max(0.0) * link.length_km
}

/// Registered count rate of a non-paralyzable detector at input `true_rate_cps`.
pub fn dead_time_throughput(true_rate_cps: f64, det: &DetectorModel) -> f64 {
    let r = true_rate_cps.max(0.0);
    let tau = det.dead_time_s();
    if tau == 0.0 {
        return r;
    }
    if r.is_infinite() {
        return 1.0 / tau;
    }
    r / (1.0 + r * tau)
}
