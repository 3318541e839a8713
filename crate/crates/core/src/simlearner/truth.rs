use super::{generate_span, DgpConfig, IndividualRecord, SimError};
use crate::estimands::{Contrast, EstimandSpec, Exposure, World};
use crate::exec::Execution;
use crate::stats::Accumulator;

/// Rows of the truth table: one potential outcome per intervention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Intervention {
    OfferNo,
    Offer,
    FollowNo,
    Follow,
    NoBreastfeeding,
    OfferNoStarted,
    OfferStarted,
    FollowStarted,
    FullDuration,
}

impl Intervention {
    pub const ALL: [Intervention; 9] = [
        Intervention::OfferNo,
        Intervention::Offer,
        Intervention::FollowNo,
        Intervention::Follow,
        Intervention::NoBreastfeeding,
        Intervention::OfferNoStarted,
        Intervention::OfferStarted,
        Intervention::FollowStarted,
        Intervention::FullDuration,
    ];

    /// Name of the matching potential-outcome column.
    pub fn column(self) -> &'static str {
        match self {
            Intervention::OfferNo => "y_a1_0",
            Intervention::Offer => "y_a1_1",
            Intervention::FollowNo => "y_a2_0",
            Intervention::Follow => "y_a2_1",
            Intervention::NoBreastfeeding => "y_a3_0",
            Intervention::OfferNoStarted => "y_a1_0_a3_1",
            Intervention::OfferStarted => "y_a1_1_a3_1",
            Intervention::FollowStarted => "y_a2_1_a3_1",
            Intervention::FullDuration => "y_a4_1",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Intervention::OfferNo => "programme not offered",
            Intervention::Offer => "programme offered",
            Intervention::FollowNo => "programme not followed",
            Intervention::Follow => "programme followed",
            Intervention::NoBreastfeeding => "no breastfeeding",
            Intervention::OfferNoStarted => "not offered, breastfeeding started",
            Intervention::OfferStarted => "offered, breastfeeding started",
            Intervention::FollowStarted => "followed, breastfeeding started",
            Intervention::FullDuration => "breastfed for 3 months",
        }
    }

    fn index(self) -> usize {
        Self::ALL.iter().position(|&r| r == self).expect("listed")
    }

    pub fn value(self, r: &IndividualRecord) -> f64 {
        let p = &r.potentials;
        match self {
            Intervention::OfferNo => p.y_a1_0,
            Intervention::Offer => p.y_a1_1,
            Intervention::FollowNo => p.y_a2_0,
            Intervention::Follow => p.y_a2_1,
            Intervention::NoBreastfeeding => p.y_a3_0,
            Intervention::OfferNoStarted => p.y_a1_0_a3_1,
            Intervention::OfferStarted => p.y_a1_1_a3_1,
            Intervention::FollowStarted => p.y_a2_1_a3_1,
            Intervention::FullDuration => p.y_a4_1,
        }
    }
}

/// Columns of the truth table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subpopulation {
    Overall,
    Followed,
    OfferedNotFollowed,
    OfferedStarted,
    OfferedNotStarted,
    NotOfferedStarted,
    NotOfferedNotStarted,
    EducationLow,
    EducationIntermediate,
    EducationHigh,
}

impl Subpopulation {
    pub const ALL: [Subpopulation; 10] = [
        Subpopulation::Overall,
        Subpopulation::Followed,
        Subpopulation::OfferedNotFollowed,
        Subpopulation::OfferedStarted,
        Subpopulation::OfferedNotStarted,
        Subpopulation::NotOfferedStarted,
        Subpopulation::NotOfferedNotStarted,
        Subpopulation::EducationLow,
        Subpopulation::EducationIntermediate,
        Subpopulation::EducationHigh,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Subpopulation::Overall => "overall",
            Subpopulation::Followed => "a2=1",
            Subpopulation::OfferedNotFollowed => "a1=1,a2=0",
            Subpopulation::OfferedStarted => "a1=1,a3=1",
            Subpopulation::OfferedNotStarted => "a1=1,a3=0",
            Subpopulation::NotOfferedStarted => "a1=0,a3=1",
            Subpopulation::NotOfferedNotStarted => "a1=0,a3=0",
            Subpopulation::EducationLow => "edu=low",
            Subpopulation::EducationIntermediate => "edu=int",
            Subpopulation::EducationHigh => "edu=high",
        }
    }

    fn index(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).expect("listed")
    }

    pub fn contains(self, r: &IndividualRecord) -> bool {
        let e = &r.exposures;
        let edu = r.covariates.education.code();
        match self {
            Subpopulation::Overall => true,
            Subpopulation::Followed => e.a2,
            Subpopulation::OfferedNotFollowed => e.a1 && !e.a2,
            Subpopulation::OfferedStarted => e.a1 && e.a3,
            Subpopulation::OfferedNotStarted => e.a1 && !e.a3,
            Subpopulation::NotOfferedStarted => !e.a1 && e.a3,
            Subpopulation::NotOfferedNotStarted => !e.a1 && !e.a3,
            Subpopulation::EducationLow => edu == 0,
            Subpopulation::EducationIntermediate => edu == 1,
            Subpopulation::EducationHigh => edu == 2,
        }
    }
}

/// Streaming fold of potential outcomes into cell sums.
#[derive(Debug, Clone, Default)]
pub struct TruthAccumulator {
    sums: [[Accumulator; 10]; 9],
    counts: [u64; 10],
}

impl TruthAccumulator {
    pub fn add(&mut self, r: &IndividualRecord) {
        for col in Subpopulation::ALL {
            if col.contains(r) {
                let c = col.index();
                self.counts[c] += 1;
                for row in Intervention::ALL {
                    self.sums[row.index()][c].add(row.value(r));
                }
            }
        }
    }

    pub fn merge(&mut self, other: &TruthAccumulator) {
        for c in 0..10 {
            self.counts[c] += other.counts[c];
            for r in 0..9 {
                self.sums[r][c].merge(&other.sums[r][c]);
            }
        }
    }

    pub fn finish(&self) -> Result<TruthTable, SimError> {
        let mut means = [[0.0; 10]; 9];
        for col in Subpopulation::ALL {
            let c = col.index();
            if self.counts[c] == 0 {
                return Err(SimError::EmptySubpopulation(col.label().to_string()));
            }
            for (m, s) in means.iter_mut().zip(&self.sums) {
                m[c] = s[c].value() / self.counts[c] as f64;
            }
        }
        Ok(TruthTable {
            means,
            counts: self.counts,
        })
    }
}

/// Mean potential outcome per (intervention, subpopulation).
#[derive(Debug, Clone, PartialEq)]
pub struct TruthTable {
    means: [[f64; 10]; 9],
    counts: [u64; 10],
}

/// A named difference of two truth-table cells.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedContrast {
    pub name: &'static str,
    pub value: f64,
}

impl TruthTable {
    pub fn get(&self, row: Intervention, col: Subpopulation) -> f64 {
        self.means[row.index()][col.index()]
    }

    pub fn count(&self, col: Subpopulation) -> u64 {
        self.counts[col.index()]
    }

    /// The headline contrasts derivable from the table.
    pub fn contrasts(&self) -> Vec<NamedContrast> {
        use Intervention as I;
        use Subpopulation as S;
        let d = |a: I, b: I, s: S| self.get(a, s) - self.get(b, s);
        vec![
            NamedContrast { name: "ATE offer", value: d(I::Offer, I::OfferNo, S::Overall) },
            NamedContrast { name: "ATE uptake", value: d(I::Follow, I::FollowNo, S::Overall) },
            NamedContrast { name: "ATT uptake", value: d(I::Follow, I::FollowNo, S::Followed) },
            NamedContrast { name: "ATNT uptake", value: d(I::Follow, I::FollowNo, S::OfferedNotFollowed) },
            NamedContrast {
                name: "ATE initiation | a1=0",
                value: d(I::OfferNoStarted, I::NoBreastfeeding, S::Overall),
            },
            NamedContrast {
                name: "ATE initiation | a1=1",
                value: d(I::OfferStarted, I::NoBreastfeeding, S::Overall),
            },
            NamedContrast {
                name: "ATE initiation | a2=1",
                value: d(I::FollowStarted, I::NoBreastfeeding, S::Overall),
            },
            NamedContrast {
                name: "ATT initiation | a1=1",
                value: d(I::OfferStarted, I::NoBreastfeeding, S::OfferedStarted),
            },
            NamedContrast {
                name: "ATT initiation | a1=0",
                value: d(I::OfferNoStarted, I::NoBreastfeeding, S::NotOfferedStarted),
            },
            NamedContrast {
                name: "full duration vs none",
                value: d(I::FullDuration, I::NoBreastfeeding, S::Overall),
            },
        ]
    }
}

impl TruthTable {
    /// Population value of the contrast a spec targets, when the table holds it.
    pub fn for_spec(&self, spec: &EstimandSpec) -> Option<f64> {
        use Intervention as I;
        use Subpopulation as S;
        let (treat, control) = match (spec.exposure, spec.world) {
            (Exposure::A1, World::Natural) => (I::Offer, I::OfferNo),
            (Exposure::A2, World::Natural) => (I::Follow, I::FollowNo),
            (Exposure::A3, World::Offer(false)) => (I::OfferNoStarted, I::NoBreastfeeding),
            (Exposure::A3, World::Offer(true)) => (I::OfferStarted, I::NoBreastfeeding),
            (Exposure::A3, World::Followed) => (I::FollowStarted, I::NoBreastfeeding),
            _ => return None,
        };
        let col = match (spec.contrast, spec.education) {
            (Contrast::Ate, None) => S::Overall,
            (Contrast::Ate, Some(0)) => S::EducationLow,
            (Contrast::Ate, Some(1)) => S::EducationIntermediate,
            (Contrast::Ate, Some(2)) => S::EducationHigh,
            (_, Some(_)) => return None,
            (Contrast::Att | Contrast::Cace, None) => match (spec.exposure, spec.world) {
                // one-sided noncompliance: compliers are exactly the takers
                (Exposure::A2, _) => S::Followed,
                (Exposure::A3, World::Offer(true)) => S::OfferedStarted,
                (Exposure::A3, World::Offer(false)) => S::NotOfferedStarted,
                _ => return None,
            },
            (Contrast::Atnt, None) => match spec.exposure {
                Exposure::A2 => S::OfferedNotFollowed,
                _ => return None,
            },
        };
        if spec.contrast == Contrast::Cace && spec.exposure != Exposure::A2 {
            return None;
        }
        Some(self.get(treat, col) - self.get(control, col))
    }
}

pub fn truth_table(records: &[IndividualRecord]) -> Result<TruthTable, SimError> {
    let mut acc = TruthAccumulator::default();
    for r in records {
        acc.add(r);
    }
    acc.finish()
}

/// Truth table of `config.n` freshly generated records without holding
/// them in memory. Chunk boundaries are fixed, so the result does not
/// depend on the execution strategy.
pub fn simulate_truth(config: &DgpConfig, exec: Execution) -> Result<TruthTable, SimError> {
    config.validate()?;
    const CHUNK: usize = 1 << 16;
    let parts = exec.map_chunks(config.n, CHUNK, |s, e| {
        let mut acc = TruthAccumulator::default();
        for r in generate_span(config, s as u64, e as u64) {
            acc.add(&r);
        }
        acc
    });
    let mut total = TruthAccumulator::default();
    for p in &parts {
        total.merge(p);
    }
    total.finish()
}

/// Mean difference of the two potential outcomes a spec contrasts, over
/// the records in its target population.
pub fn true_contrast(records: &[IndividualRecord], spec: &EstimandSpec) -> Result<f64, SimError> {
    spec.check().map_err(|e| SimError::UnsupportedWorld(e.to_string()))?;
    use Intervention as I;
    let unsupported = || Err(SimError::UnsupportedWorld(spec.to_string()));
    let (treat, control) = match (spec.exposure, spec.world) {
        (Exposure::A1, _) => (I::Offer, I::OfferNo),
        (Exposure::A2, _) => (I::Follow, I::FollowNo),
        (Exposure::A3, World::Offer(false)) => (I::OfferNoStarted, I::NoBreastfeeding),
        (Exposure::A3, World::Offer(true)) => (I::OfferStarted, I::NoBreastfeeding),
        (Exposure::A3, World::Followed) => (I::FollowStarted, I::NoBreastfeeding),
        _ => return unsupported(),
    };
    let exposed = |r: &IndividualRecord| -> Option<bool> {
        let e = &r.exposures;
        match (spec.exposure, spec.world) {
            (Exposure::A1, _) => Some(e.a1),
            // untreated for uptake means offered but not taking it up
            (Exposure::A2, _) => {
                if e.a2 {
                    Some(true)
                } else if e.a1 {
                    Some(false)
                } else {
                    None
                }
            }
            (Exposure::A3, World::Offer(v)) => (e.a1 == v).then_some(e.a3),
            _ => None,
        }
    };
    if spec.world == World::Followed && matches!(spec.contrast, Contrast::Att | Contrast::Atnt) {
        // initiation under forced uptake is not observed for anyone
        return unsupported();
    }
    let keep = |r: &IndividualRecord| -> bool {
        if spec.education.is_some_and(|level| r.covariates.education.code() != level) {
            return false;
        }
        match spec.contrast {
            Contrast::Ate => true,
            Contrast::Att => exposed(r) == Some(true),
            Contrast::Atnt => exposed(r) == Some(false),
            Contrast::Cace => classify_compliance(r) == Compliance::Complier,
        }
    };
    let mut acc = Accumulator::default();
    let mut n = 0u64;
    for r in records.iter().filter(|r| keep(r)) {
        acc.add(treat.value(r) - control.value(r));
        n += 1;
    }
    if n == 0 {
        return Err(SimError::EmptySubpopulation(spec.to_string()));
    }
    Ok(acc.value() / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compliance {
    Complier,
    NeverTaker,
}

/// Uptake is only possible when offered, so the only principal strata are
/// compliers (would take up if offered) and never-takers.
pub fn classify_compliance(r: &IndividualRecord) -> Compliance {
    if r.potentials.a2_offer {
        Compliance::Complier
    } else {
        Compliance::NeverTaker
    }
}
