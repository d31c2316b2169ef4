use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::AceError;
use crate::numerics::MlpParameters;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Score every proposal with the mean critic and act on the best.
    ArgmaxMeanCritic,
    /// One actor, no critics: plain DDPG inference.
    SingleActorPassthrough,
}

/// What the ensemble saw when it chose an action.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionTrace {
    pub proposed_actions: Vec<Vec<f64>>,
    /// Mean critic score per proposal; empty in passthrough mode.
    pub scores: Vec<f64>,
    pub chosen_index: usize,
    /// `scores[chosen_index]`, absent in passthrough mode.
    pub chosen_score: Option<f64>,
}

/// N actors proposing actions and M critics scoring them.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsemblePolicy {
    actors: Vec<MlpParameters>,
    critics: Vec<MlpParameters>,
    mode: SelectionMode,
}

/// Index of the largest score; the lowest index wins exact ties.
pub fn argmax_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((i, s)),
        }
    }
    best.map(|(i, _)| i)
}

/// Mean of the critics' values at `(state, action)`.
pub fn score_action(
    critics: &[MlpParameters],
    state: &[f64],
    action: &[f64],
) -> Result<f64, AceError> {
    Ok(score_actions(critics, state, std::slice::from_ref(&action.to_vec()))?[0])
}

/// Mean critic score for each candidate action at one state, evaluated as
/// one batch per critic.
pub fn score_actions(
    critics: &[MlpParameters],
    state: &[f64],
    actions: &[Vec<f64>],
) -> Result<Vec<f64>, AceError> {
    if critics.is_empty() {
        return Err(AceError::NoCritics);
    }
    let width = state.len() + actions.first().map_or(0, Vec::len);
    let mut inputs = Array2::zeros((actions.len(), width));
    for (mut row, action) in inputs.rows_mut().into_iter().zip(actions) {
        if state.len() + action.len() != width {
            return Err(AceError::Shape(
                "proposals differ in action dimension".into(),
            ));
        }
        for (dst, src) in row.iter_mut().zip(state.iter().chain(action)) {
            *dst = *src;
        }
    }
    Ok(mean_critic_batch(critics, inputs.view())?.to_vec())
}

/// Row-wise mean of the critics over a batch of `[state | action]` inputs.
pub fn mean_critic_batch(
    critics: &[MlpParameters],
    inputs: ArrayView2<'_, f64>,
) -> Result<Array1<f64>, AceError> {
    let (first, rest) = critics.split_first().ok_or(AceError::NoCritics)?;
    let mut sums = first.predict_batch(inputs)?.column(0).to_owned();
    for critic in rest {
        sums += &critic.predict_batch(inputs)?.column(0);
    }
    let m = critics.len() as f64;
    Ok(sums.mapv(|s| s / m))
}

impl EnsemblePolicy {
    pub fn new(actors: Vec<MlpParameters>, critics: Vec<MlpParameters>) -> Result<Self, AceError> {
        let first = actors.first().ok_or(AceError::NoActors)?;
        let (state_dim, action_dim) = (first.input_dim(), first.output_dim());
        for (j, a) in actors.iter().enumerate() {
            if a.input_dim() != state_dim || a.output_dim() != action_dim {
                return Err(AceError::Shape(format!(
                    "actor {j} maps {} -> {}, actor 0 maps {state_dim} -> {action_dim}",
                    a.input_dim(),
                    a.output_dim()
                )));
            }
        }
        for (m, c) in critics.iter().enumerate() {
            if c.input_dim() != state_dim + action_dim || c.output_dim() != 1 {
                return Err(AceError::Shape(format!(
                    "critic {m} maps {} -> {}, expected {} -> 1",
                    c.input_dim(),
                    c.output_dim(),
                    state_dim + action_dim
                )));
            }
        }
        let mode = if critics.is_empty() {
            if actors.len() != 1 {
                return Err(AceError::CriticlessEnsemble(actors.len()));
            }
            SelectionMode::SingleActorPassthrough
        } else {
            SelectionMode::ArgmaxMeanCritic
        };
        Ok(Self {
            actors,
            critics,
            mode,
        })
    }

    pub fn actors(&self) -> &[MlpParameters] {
        &self.actors
    }

    pub fn critics(&self) -> &[MlpParameters] {
        &self.critics
    }

    pub fn mode(&self) -> SelectionMode {
        self.mode
    }

    pub fn state_dim(&self) -> usize {
        self.actors[0].input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.actors[0].output_dim()
    }

    /// `A{N}C{M}`.
    pub fn label(&self) -> String {
        format!("A{}C{}", self.actors.len(), self.critics.len())
    }

    pub fn is_finite(&self) -> bool {
        self.actors
            .iter()
            .chain(&self.critics)
            .all(MlpParameters::is_finite)
    }

    fn check_state(&self, state: &[f64]) -> Result<(), AceError> {
        if state.len() != self.state_dim() {
            return Err(AceError::Shape(format!(
                "state has {} values, ensemble expects {}",
                state.len(),
                self.state_dim()
            )));
        }
        Ok(())
    }

    /// `mu_j(state)` for every actor, in actor order.
    pub fn propose_actions(&self, state: &[f64]) -> Result<Vec<Vec<f64>>, AceError> {
        self.check_state(state)?;
        self.actors
            .iter()
            .map(|a| a.predict(state).map_err(AceError::from))
            .collect()
    }

    /// The proposal with the highest mean critic score.
    pub fn select_action(&self, state: &[f64]) -> Result<(Vec<f64>, SelectionTrace), AceError> {
        let proposed_actions = self.propose_actions(state)?;
        let (scores, chosen_index, chosen_score) = match self.mode {
            SelectionMode::SingleActorPassthrough => (Vec::new(), 0, None),
            SelectionMode::ArgmaxMeanCritic => {
                let scores = score_actions(&self.critics, state, &proposed_actions)?;
                let i = argmax_first(&scores).expect("at least one actor");
                let best = scores[i];
                (scores, i, Some(best))
            }
        };
        let action = proposed_actions[chosen_index].clone();
        Ok((
            action,
            SelectionTrace {
                proposed_actions,
                scores,
                chosen_index,
                chosen_score,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Activation, Layer};
    use ndarray::array;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn actor(seed: u64) -> MlpParameters {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MlpParameters::init(
            &[3, 8, 2],
            Activation::Selu,
            Activation::Tanh,
            1.0,
            &mut rng,
        )
        .unwrap()
    }

    fn critic(seed: u64) -> MlpParameters {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        MlpParameters::init(
            &[5, 8, 1],
            Activation::Selu,
            Activation::Linear,
            1.0,
            &mut rng,
        )
        .unwrap()
    }

    fn constant_critic(c: f64) -> MlpParameters {
        MlpParameters::new(
            vec![Layer::new(Array2::zeros((1, 5)), array![c]).unwrap()],
            Activation::Linear,
            Activation::Linear,
        )
        .unwrap()
    }

    /// Critic scoring `w . action`, ignoring the state.
    fn action_critic(w: [f64; 2]) -> MlpParameters {
        MlpParameters::new(
            vec![Layer::new(array![[0.0, 0.0, 0.0, w[0], w[1]]], Array1::zeros(1)).unwrap()],
            Activation::Linear,
            Activation::Linear,
        )
        .unwrap()
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax_first(&[3.1, 2.0, 5.4]), Some(2));
        assert_eq!(argmax_first(&[1.0, 4.0, 4.0]), Some(1));
        assert_eq!(argmax_first(&[]), None);
    }

    #[test]
    fn score_is_critic_mean() {
        let s = [0.1, 0.2, 0.3];
        let a = [0.5, -0.5];
        let single = critic(1);
        let direct = single.predict(&[0.1, 0.2, 0.3, 0.5, -0.5]).unwrap()[0];
        assert_eq!(
            score_action(std::slice::from_ref(&single), &s, &a).unwrap(),
            direct
        );
        let pair = [constant_critic(2.0), constant_critic(4.0)];
        assert_eq!(score_action(&pair, &s, &a).unwrap(), 3.0);
        let same = vec![constant_critic(1.25); 7];
        assert_eq!(score_action(&same, &s, &a).unwrap(), 1.25);
        assert!(matches!(
            score_action(&[], &s, &a),
            Err(AceError::NoCritics)
        ));
    }

    #[test]
    fn proposals_follow_actor_order() {
        let actors: Vec<_> = (0..10).map(actor).collect();
        let ens = EnsemblePolicy::new(actors.clone(), vec![critic(0)]).unwrap();
        let s = [0.3, -0.1, 0.9];
        let proposed = ens.propose_actions(&s).unwrap();
        assert_eq!(proposed.len(), 10);
        for (p, a) in proposed.iter().zip(&actors) {
            assert_eq!(p, &a.predict(&s).unwrap());
            assert!(p.iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn identical_actors_give_identical_choice() {
        let ens = EnsemblePolicy::new(vec![actor(4); 5], vec![critic(2), critic(3)]).unwrap();
        let s = [0.3, -0.1, 0.9];
        let (a, trace) = ens.select_action(&s).unwrap();
        assert_eq!(a, actor(4).predict(&s).unwrap());
        assert_eq!(trace.chosen_index, 0);
        assert!(trace.proposed_actions.iter().all(|p| p == &a));
    }

    #[test]
    fn passthrough_is_plain_actor() {
        let ens = EnsemblePolicy::new(vec![actor(7)], vec![]).unwrap();
        assert_eq!(ens.mode(), SelectionMode::SingleActorPassthrough);
        assert_eq!(ens.label(), "A1C0");
        let s = [1.0, 2.0, -3.0];
        let (a, trace) = ens.select_action(&s).unwrap();
        assert_eq!(a, actor(7).predict(&s).unwrap());
        assert!(trace.scores.is_empty() && trace.chosen_score.is_none());
    }

    #[test]
    fn rejects_invalid_ensembles() {
        assert!(matches!(
            EnsemblePolicy::new(vec![], vec![]),
            Err(AceError::NoActors)
        ));
        assert!(matches!(
            EnsemblePolicy::new(vec![actor(0), actor(1)], vec![]),
            Err(AceError::CriticlessEnsemble(2))
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let wide = MlpParameters::init(
            &[4, 8, 2],
            Activation::Selu,
            Activation::Tanh,
            1.0,
            &mut rng,
        )
        .unwrap();
        assert!(EnsemblePolicy::new(vec![actor(0), wide], vec![critic(0)]).is_err());
        let bad_critic = MlpParameters::init(
            &[5, 8, 2],
            Activation::Selu,
            Activation::Linear,
            1.0,
            &mut rng,
        )
        .unwrap();
        assert!(EnsemblePolicy::new(vec![actor(0)], vec![bad_critic]).is_err());
        let ens = EnsemblePolicy::new(vec![actor(0)], vec![critic(0)]).unwrap();
        assert!(ens.select_action(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn picks_highest_scored_proposal() {
        // Critic prefers large first action coordinate.
        let ens = EnsemblePolicy::new((0..6).map(actor).collect(), vec![action_critic([1.0, 0.0])])
            .unwrap();
        let s = [0.2, 0.4, -0.6];
        let (a, trace) = ens.select_action(&s).unwrap();
        let best = trace
            .proposed_actions
            .iter()
            .map(|p| p[0])
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(a[0], best);
        assert_eq!(trace.chosen_score, Some(trace.scores[trace.chosen_index]));
    }

    proptest! {
        #[test]
        fn positive_affine_transform_keeps_choice(
            seeds in proptest::collection::vec(0u64..500, 1..6),
            scale in 0.01f64..100.0,
            shift in -50.0f64..50.0,
            state in proptest::array::uniform3(-2.0f64..2.0),
        ) {
            let actors: Vec<_> = seeds.iter().map(|&s| actor(s)).collect();
            let base = critic(seeds[0]);
            let mut transformed = base.clone();
            {
                let last = transformed.tensors_mut().collect::<Vec<_>>();
                let n = last.len();
                let mut it = last.into_iter().skip(n - 2);
                it.next().unwrap().iter_mut().for_each(|w| *w *= scale);
                it.next().unwrap().iter_mut().for_each(|b| *b = *b * scale + shift);
            }
            let a = EnsemblePolicy::new(actors.clone(), vec![base]).unwrap();
            let b = EnsemblePolicy::new(actors, vec![transformed]).unwrap();
            let (_, ta) = a.select_action(&state).unwrap();
            let (_, tb) = b.select_action(&state).unwrap();
            // Rounding can only matter for near-ties.
            let margin = {
                let mut s = ta.scores.clone();
                s.sort_by(f64::total_cmp);
                if s.len() > 1 { s[s.len() - 1] - s[s.len() - 2] } else { f64::INFINITY }
            };
            if margin > 1e-9 {
                prop_assert_eq!(ta.chosen_index, tb.chosen_index);
            }
        }

        #[test]
        fn adding_an_actor_never_lowers_chosen_score(
            seeds in proptest::collection::vec(0u64..500, 1..6),
            extra in 0u64..500,
            state in proptest::array::uniform3(-2.0f64..2.0),
        ) {
            let critics = vec![critic(1), critic(2)];
            let actors: Vec<_> = seeds.iter().map(|&s| actor(s)).collect();
            let mut more = actors.clone();
            more.push(actor(extra));
            let (_, small) = EnsemblePolicy::new(actors, critics.clone()).unwrap().select_action(&state).unwrap();
            let (_, big) = EnsemblePolicy::new(more, critics).unwrap().select_action(&state).unwrap();
            prop_assert!(big.chosen_score.unwrap() >= small.chosen_score.unwrap());
        }
    }
}
