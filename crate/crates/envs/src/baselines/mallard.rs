use ats_core::{ParameterVector, Policy, PolicyClass, PolicySpace};
use rand::RngCore;

use super::rbf::Embedding;
use crate::mallard::{MallardModel, MallardState, Practice};

/// The same practice every year.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPractice(pub Practice);

impl Policy<MallardState, Practice> for FixedPractice {
    fn act(&self, _: &MallardState, _: &mut dyn RngCore) -> Practice {
        self.0
    }
}

/// The four fixed practices, member `i` being `Practice::ALL[i]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedPracticeClass;

impl PolicyClass<MallardModel> for FixedPracticeClass {
    type Policy = FixedPractice;

    fn space(&self) -> PolicySpace {
        PolicySpace::Finite(Practice::ALL.len())
    }

    fn build(&self, params: &[f64], _: &ParameterVector) -> FixedPractice {
        FixedPractice(Practice::ALL[params[0] as usize])
    }
}

/// `(total population, ponds)`; lifted states use a fixed class split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MallardEmbedding {
    pub class_split: [f64; 4],
}

impl Embedding<MallardState> for MallardEmbedding {
    fn embed(&self, state: &MallardState) -> [f64; 2] {
        [state.total(), state.ponds]
    }

    fn lift(&self, point: [f64; 2]) -> MallardState {
        let s = self.class_split;
        MallardState {
            adult_male: point[0] * s[0],
            adult_female: point[0] * s[1],
            young_male: point[0] * s[2],
            young_female: point[0] * s[3],
            ponds: point[1],
            year: 0,
        }
    }
}
