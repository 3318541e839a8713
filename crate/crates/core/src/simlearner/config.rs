use serde::{Deserialize, Serialize};

use super::SimError;

/// Every structural coefficient of the generator.
///
/// Continuous covariates enter the models centred: age as `age - age_center`
/// (years) and birth weight as `(bweight - bweight_center) / 1000` (kg).
/// Logit-scale blocks are prefixed `uptake_` (programme uptake among the
/// offered), `init_` (breastfeeding initiation) and `offer_` (the randomised
/// offer). Duration is in days, outcome terms in grams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    pub n: usize,
    pub seed: u64,

    pub age_mean: f64,
    pub age_sd: f64,
    pub age_min: f64,
    pub age_max: f64,
    pub age_center: f64,
    pub p_urban: f64,
    pub p_east: f64,
    /// Education is an ordinal cut of `edu_age_slope * age_c + Logistic(0,1)`.
    pub edu_age_slope: f64,
    pub edu_cut_low: f64,
    pub edu_cut_high: f64,
    pub p_allergy: f64,
    pub smoke_intercept: f64,
    pub smoke_edu_low: f64,
    pub smoke_edu_high: f64,
    pub p_female: f64,
    pub bweight_center: f64,
    pub bweight_male: f64,
    pub bweight_smoke: f64,
    pub bweight_age: f64,
    pub bweight_sd: f64,
    pub bweight_min: f64,
    pub bweight_max: f64,
    pub caesar_intercept: f64,
    pub caesar_age: f64,
    /// Per kg of absolute deviation from `bweight_center`.
    pub caesar_bweight_dev: f64,

    pub p_offer: f64,
    /// Logit loading of the offer on `U + age_c / age_sd`; nonzero breaks
    /// randomisation of the offer on purpose.
    pub offer_confounding: f64,

    pub uptake_intercept: f64,
    pub uptake_age: f64,
    pub uptake_edu_int: f64,
    pub uptake_edu_high: f64,
    pub uptake_smoke: f64,

    pub init_intercept: f64,
    pub init_uptake: f64,
    pub init_age: f64,
    pub init_edu_int: f64,
    pub init_edu_high: f64,
    pub init_smoke: f64,
    pub init_bweight: f64,
    pub init_female: f64,

    pub dur_intercept: f64,
    pub dur_uptake: f64,
    pub dur_age: f64,
    pub dur_edu_int: f64,
    pub dur_edu_high: f64,
    pub dur_smoke: f64,
    pub dur_allergy: f64,
    pub dur_bweight: f64,
    pub dur_caesar: f64,
    pub dur_male: f64,
    pub dur_sd: f64,
    pub dur_max: f64,

    /// Gain from starting breastfeeding, before the per-day term.
    pub effect_start: f64,
    pub effect_per_day: f64,
    pub effect_mod_edu_int: f64,
    pub effect_mod_edu_high: f64,
    pub effect_mod_smoke: f64,
    pub effect_mod_bweight: f64,

    pub base_intercept: f64,
    pub base_age: f64,
    pub base_edu_int: f64,
    pub base_edu_high: f64,
    pub base_smoke: f64,
    pub base_bweight: f64,
    pub base_female: f64,
    pub noise_sd: f64,

    /// Scale of the hidden confounder U ~ N(0,1); 0 means no unmeasured confounding.
    pub unmeasured_confounding_strength: f64,
    /// Grams added to every potential outcome per unit of `strength * U`.
    pub u_outcome_grams: f64,
    /// Fraction of the uptake loading that U also has on initiation.
    pub u_init_share: f64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self::calibrated()
    }
}

impl DgpConfig {
    /// Coefficients calibrated so a large sample reproduces the reference
    /// table of average potential infant weights.
    pub fn calibrated() -> Self {
        Self {
            n: 17044,
            seed: 1,
            age_mean: 25.5,
            age_sd: 4.8,
            age_min: 17.0,
            age_max: 44.0,
            age_center: 25.5,
            p_urban: 0.6,
            p_east: 0.5,
            edu_age_slope: 0.10,
            edu_cut_low: -0.45,
            edu_cut_high: 1.35,
            p_allergy: 0.15,
            smoke_intercept: -1.7,
            smoke_edu_low: 0.8,
            smoke_edu_high: -0.6,
            p_female: 0.485,
            bweight_center: 3450.0,
            bweight_male: 130.0,
            bweight_smoke: -170.0,
            bweight_age: 6.0,
            bweight_sd: 500.0,
            bweight_min: 1200.0,
            bweight_max: 5200.0,
            caesar_intercept: -1.9,
            caesar_age: 0.06,
            caesar_bweight_dev: 0.5,

            p_offer: 0.5,
            offer_confounding: 0.0,

            uptake_intercept: 0.328637,
            uptake_age: 0.0843145,
            uptake_edu_int: 0.421464,
            uptake_edu_high: 0.896667,
            uptake_smoke: -0.400203,

            init_intercept: 0.433789,
            init_uptake: 1.641724,
            init_age: 0.183585,
            init_edu_int: 0.0706139,
            init_edu_high: 0.194817,
            init_smoke: -0.428984,
            init_bweight: 0.0826137,
            init_female: -0.871859,

            dur_intercept: 75.843394,
            dur_uptake: 17.08655,
            dur_age: 1.059368,
            dur_edu_int: 16.811082,
            dur_edu_high: 23.587879,
            dur_smoke: -7.185181,
            dur_allergy: 5.262198,
            dur_bweight: 8.950343,
            dur_caesar: -9.559199,
            dur_male: -4.2331,
            dur_sd: 30.0,
            dur_max: 91.0,

            effect_start: -126.526388,
            effect_per_day: 7.56315,
            effect_mod_edu_int: -0.238709,
            effect_mod_edu_high: -0.519739,
            effect_mod_smoke: 0.691406,
            effect_mod_bweight: 0.085743,

            base_intercept: 5826.749435,
            base_age: 0.285049,
            base_edu_int: 95.283977,
            base_edu_high: 199.775032,
            base_smoke: -43.787082,
            base_bweight: 942.535631,
            base_female: -217.611611,
            noise_sd: 80.0,

            unmeasured_confounding_strength: 0.0,
            u_outcome_grams: 100.0,
            u_init_share: 0.5,
        }
    }

    /// Same covariates and exposure mechanisms, but no exposure affects the outcome.
    pub fn null_effect() -> Self {
        Self {
            effect_start: 0.0,
            effect_per_day: 0.0,
            ..Self::calibrated()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let cfg: Self = toml::from_str(text).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat config always serialises")
    }

    /// Checks ranges and the qualitative sign structure of the mechanisms.
    pub fn validate(&self) -> Result<(), SimError> {
        let mut bad = Vec::new();
        if self.n < 1 {
            bad.push("n must be at least 1".to_string());
        }
        for (name, p) in [
            ("p_urban", self.p_urban),
            ("p_east", self.p_east),
            ("p_allergy", self.p_allergy),
            ("p_female", self.p_female),
            ("p_offer", self.p_offer),
            ("u_init_share", self.u_init_share),
        ] {
            if !(0.0..=1.0).contains(&p) {
                bad.push(format!("{name} must lie in [0, 1]"));
            }
        }
        for (name, v) in [
            ("age_sd", self.age_sd),
            ("bweight_sd", self.bweight_sd),
            ("dur_sd", self.dur_sd),
            ("dur_max", self.dur_max),
            ("bweight_min", self.bweight_min),
        ] {
            if v.is_nan() || v <= 0.0 {
                bad.push(format!("{name} must be positive"));
            }
        }
        for (name, v) in [("noise_sd", self.noise_sd), ("unmeasured_confounding_strength", self.unmeasured_confounding_strength)] {
            if v.is_nan() || v < 0.0 {
                bad.push(format!("{name} must be nonnegative"));
            }
        }
        if self.age_min >= self.age_max || self.bweight_min >= self.bweight_max || self.edu_cut_low >= self.edu_cut_high {
            bad.push("lower bounds and cut points must be below their upper counterparts".into());
        }
        let nonneg = [
            ("uptake_age", self.uptake_age),
            ("uptake_edu_int", self.uptake_edu_int),
            ("uptake_edu_high", self.uptake_edu_high),
            ("init_bweight", self.init_bweight),
            ("dur_uptake", self.dur_uptake),
            ("dur_age", self.dur_age),
            ("dur_edu_int", self.dur_edu_int),
            ("dur_edu_high", self.dur_edu_high),
            ("dur_allergy", self.dur_allergy),
            ("dur_bweight", self.dur_bweight),
            ("effect_per_day", self.effect_per_day),
        ];
        let nonpos = [
            ("uptake_smoke", self.uptake_smoke),
            ("init_female", self.init_female),
            ("dur_smoke", self.dur_smoke),
            ("dur_caesar", self.dur_caesar),
            ("dur_male", self.dur_male),
        ];
        for (name, v) in nonneg {
            if v.is_nan() || v < 0.0 {
                bad.push(format!("{name} must be >= 0"));
            }
        }
        for (name, v) in nonpos {
            if v.is_nan() || v > 0.0 {
                bad.push(format!("{name} must be <= 0"));
            }
        }
        if self.uptake_edu_high < self.uptake_edu_int || self.dur_edu_high < self.dur_edu_int {
            bad.push("education gradients must be monotone (high >= intermediate)".into());
        }
        if self.min_effect_modifier() <= 0.0 {
            bad.push("effect modifier must stay positive over the covariate range".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(SimError::InvalidConfig(bad.join("; ")))
        }
    }

    /// Smallest multiplier of the breastfeeding effect over the support of
    /// the modifying covariates; must be positive so the outcome increases
    /// with duration for everyone.
    fn min_effect_modifier(&self) -> f64 {
        let edu = [0.0, self.effect_mod_edu_int, self.effect_mod_edu_high];
        let smoke = [0.0, self.effect_mod_smoke];
        let bw_lo = (self.bweight_min - self.bweight_center) / 1000.0;
        let bw_hi = (self.bweight_max - self.bweight_center) / 1000.0;
        let bw = [self.effect_mod_bweight * bw_lo, self.effect_mod_bweight * bw_hi];
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        1.0 + min(&edu) + min(&smoke) + min(&bw)
    }
}
