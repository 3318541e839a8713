use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{DgpConfig, SimError};
use crate::exec::Execution;
use crate::stats::{expit, logit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Education {
    Low = 0,
    Intermediate = 1,
    High = 2,
}

impl Education {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::Low),
            1 => Some(Self::Intermediate),
            2 => Some(Self::High),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariates {
    pub age: f64,
    pub urban: bool,
    pub east: bool,
    pub education: Education,
    pub allergy: bool,
    pub smoke: bool,
    pub female: bool,
    /// Grams.
    pub bweight: f64,
    pub caesar: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exposures {
    pub a1: bool,
    pub a2: bool,
    pub a3: bool,
    pub a4: bool,
    /// Days of breastfeeding, 0 for non-initiators.
    pub bfdur: f64,
}

/// Potential infant weights (grams) under each intervention of the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialOutcomes {
    pub y_a1_0: f64,
    pub y_a1_1: f64,
    pub y_a2_0: f64,
    pub y_a2_1: f64,
    /// No breastfeeding; shared by every double intervention that sets a3 to 0.
    pub y_a3_0: f64,
    pub y_a1_0_a3_1: f64,
    pub y_a1_1_a3_1: f64,
    pub y_a2_1_a3_1: f64,
    pub y_a4_1: f64,
    /// Whether she would take up the programme if offered.
    pub a2_offer: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndividualRecord {
    pub id: u64,
    pub covariates: Covariates,
    pub exposures: Exposures,
    pub y: f64,
    pub potentials: PotentialOutcomes,
    /// Hidden confounder; carries no effect unless the config loads it.
    pub u: f64,
}

/// Draws `config.n` records. Record `i` depends only on `(config, i)`.
pub fn generate(config: &DgpConfig, exec: Execution) -> Result<Vec<IndividualRecord>, SimError> {
    config.validate()?;
    const CHUNK: usize = 4096;
    let chunks = exec.map_chunks(config.n, CHUNK, |s, e| generate_span(config, s as u64, e as u64));
    Ok(chunks.into_iter().flatten().collect())
}

/// Records with ids in `[start, end)`, without validating the config.
pub fn generate_span(config: &DgpConfig, start: u64, end: u64) -> Vec<IndividualRecord> {
    (start..end).map(|id| draw_individual(config, id)).collect()
}

pub fn draw_individual(cfg: &DgpConfig, id: u64) -> IndividualRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(id);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let z_age: f64 = normal();
    let z_bw: f64 = normal();
    let z_dur: f64 = normal();
    let eps: f64 = normal();
    let u: f64 = normal();
    let mut unif = || -> f64 { rng.random::<f64>() };
    let u_urban = unif();
    let u_east = unif();
    let u_edu = unif();
    let u_allergy = unif();
    let u_smoke = unif();
    let u_female = unif();
    let u_caesar = unif();
    let u_offer = unif();
    let u_uptake = unif();
    let u_init = unif();

    let age = (cfg.age_mean + cfg.age_sd * z_age).clamp(cfg.age_min, cfg.age_max);
    let age_c = age - cfg.age_center;
    let urban = u_urban < cfg.p_urban;
    let east = u_east < cfg.p_east;
    let u_edu = u_edu.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    let latent = cfg.edu_age_slope * age_c + logit(u_edu);
    let education = if latent < cfg.edu_cut_low {
        Education::Low
    } else if latent < cfg.edu_cut_high {
        Education::Intermediate
    } else {
        Education::High
    };
    let (e_int, e_high) = match education {
        Education::Low => (0.0, 0.0),
        Education::Intermediate => (1.0, 0.0),
        Education::High => (0.0, 1.0),
    };
    let e_low = f64::from(education == Education::Low);
    let allergy = u_allergy < cfg.p_allergy;
    let smoke = u_smoke < expit(cfg.smoke_intercept + cfg.smoke_edu_low * e_low + cfg.smoke_edu_high * e_high);
    let female = u_female < cfg.p_female;
    let s = f64::from(smoke);
    let male = f64::from(!female);
    let bweight = (cfg.bweight_center
        + cfg.bweight_male * male
        + cfg.bweight_smoke * s
        + cfg.bweight_age * age_c
        + cfg.bweight_sd * z_bw)
        .clamp(cfg.bweight_min, cfg.bweight_max);
    let bw_c = (bweight - cfg.bweight_center) / 1000.0;
    let caesar = u_caesar < expit(cfg.caesar_intercept + cfg.caesar_age * age_c + cfg.caesar_bweight_dev * bw_c.abs());

    let hidden = cfg.unmeasured_confounding_strength * u;

    let offer_logit = logit(cfg.p_offer) + cfg.offer_confounding * (u + age_c / cfg.age_sd);
    let a1 = u_offer < expit(offer_logit);
    let a2_offer = u_uptake
        < expit(
            cfg.uptake_intercept
                + cfg.uptake_age * age_c
                + cfg.uptake_edu_int * e_int
                + cfg.uptake_edu_high * e_high
                + cfg.uptake_smoke * s
                + hidden,
        );

    let init_lin = cfg.init_intercept
        + cfg.init_age * age_c
        + cfg.init_edu_int * e_int
        + cfg.init_edu_high * e_high
        + cfg.init_smoke * s
        + cfg.init_bweight * bw_c
        + cfg.init_female * f64::from(female)
        + cfg.u_init_share * hidden;
    // One uniform for both uptake states keeps initiation monotone in uptake.
    let starts_without = u_init < expit(init_lin);
    let starts_with = u_init < expit(init_lin + cfg.init_uptake);

    let dur_mean = cfg.dur_intercept
        + cfg.dur_age * age_c
        + cfg.dur_edu_int * e_int
        + cfg.dur_edu_high * e_high
        + cfg.dur_smoke * s
        + cfg.dur_allergy * f64::from(allergy)
        + cfg.dur_bweight * bw_c
        + cfg.dur_caesar * f64::from(caesar)
        + cfg.dur_male * male
        + cfg.dur_sd * z_dur;
    let dur_without = dur_mean.clamp(1.0, cfg.dur_max);
    let dur_with = (dur_mean + cfg.dur_uptake).clamp(1.0, cfg.dur_max);

    let modifier = 1.0
        + cfg.effect_mod_edu_int * e_int
        + cfg.effect_mod_edu_high * e_high
        + cfg.effect_mod_smoke * s
        + cfg.effect_mod_bweight * bw_c;
    let bf_gain = |days: f64| modifier * (cfg.effect_start + cfg.effect_per_day * days);

    let no_bf = cfg.base_intercept
        + cfg.base_age * age_c
        + cfg.base_edu_int * e_int
        + cfg.base_edu_high * e_high
        + cfg.base_smoke * s
        + cfg.base_bweight * bw_c
        + cfg.base_female * f64::from(female)
        + cfg.noise_sd * eps
        + cfg.u_outcome_grams * hidden;
    let gain_without = bf_gain(dur_without);
    let gain_with = bf_gain(dur_with);

    let y_a1_0 = if starts_without { no_bf + gain_without } else { no_bf };
    let y_a2_1 = if starts_with { no_bf + gain_with } else { no_bf };
    let y_a1_1 = if a2_offer { y_a2_1 } else { y_a1_0 };
    let potentials = PotentialOutcomes {
        y_a1_0,
        y_a1_1,
        y_a2_0: y_a1_0,
        y_a2_1,
        y_a3_0: no_bf,
        y_a1_0_a3_1: no_bf + gain_without,
        y_a1_1_a3_1: no_bf + if a2_offer { gain_with } else { gain_without },
        y_a2_1_a3_1: no_bf + gain_with,
        y_a4_1: no_bf + bf_gain(cfg.dur_max),
        a2_offer,
    };

    let a2 = a1 && a2_offer;
    let a3 = if a2 { starts_with } else { starts_without };
    let bfdur = match (a3, a2) {
        (false, _) => 0.0,
        (true, true) => dur_with,
        (true, false) => dur_without,
    };
    let exposures = Exposures {
        a1,
        a2,
        a3,
        a4: bfdur >= cfg.dur_max,
        bfdur,
    };
    let y = if a1 { y_a1_1 } else { y_a1_0 };

    IndividualRecord {
        id,
        covariates: Covariates {
            age,
            urban,
            east,
            education,
            allergy,
            smoke,
            female,
            bweight,
            caesar,
        },
        exposures,
        y,
        potentials,
        u,
    }
}
