//! Teacher-student action advising with decision-path explanations.
//!
//! Each step an advised agent either reuses an explanation it stored
//! earlier, receives advice from the teacher (storing the explanation when
//! the teacher and its distilled tree agree confidently), or acts on its own
//! epsilon-greedy policy. Plain action advising, always-accept, reflection
//! and no-advising baselines share the same entry point, [`decide`].
//!
//! Reuse happens with probability `decay^j`, where `j` counts finished
//! episodes. Stored advice therefore matters most early in training and fades
//! as the student's own values take over.

use std::collections::BTreeSet;
use std::fmt;
use std::io;

use rand::Rng;
use thiserror::Error;

use crate::dtree::{DecisionPath, DecisionTreePolicy, PartialTree};
use crate::gridworld::{FeatureSpace, StateFeatures};
use crate::scalar::Scalar;
use crate::tabular_rl::{act_epsilon_greedy, importance, LearnerError, QTable};

#[derive(Debug, Error)]
pub enum AdvisingError {
    #[error("invalid advising parameters: {0}")]
    Config(String),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error("trace output: {0}")]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Explainable advising with transfer rejection.
    Eaa,
    /// Advice followed once and forgotten.
    Aa,
    /// Explainable advising that never rejects.
    EaaAlwaysAccept,
    /// No teacher: reuse a partial tree built elsewhere, exploring instead
    /// of reusing paths that transfer rejection flags.
    EaaExplore,
    None,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Eaa,
        Mode::Aa,
        Mode::EaaAlwaysAccept,
        Mode::EaaExplore,
        Mode::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Eaa => "eaa",
            Mode::Aa => "aa",
            Mode::EaaAlwaysAccept => "eaa_always_accept",
            Mode::EaaExplore => "eaa_explore",
            Mode::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    /// Whether the mode consults a live teacher.
    pub fn has_teacher(self) -> bool {
        matches!(self, Mode::Eaa | Mode::Aa | Mode::EaaAlwaysAccept)
    }

    /// Whether the mode keeps and reuses a partial tree.
    pub fn uses_partial(self) -> bool {
        matches!(self, Mode::Eaa | Mode::EaaAlwaysAccept | Mode::EaaExplore)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Heuristic {
    Early,
    Alternative { period: usize },
    Importance { threshold: f64 },
    MistakeCorrecting { threshold: f64 },
}

impl Heuristic {
    pub fn name(&self) -> &'static str {
        match self {
            Heuristic::Early => "early",
            Heuristic::Alternative { .. } => "alternative",
            Heuristic::Importance { .. } => "importance",
            Heuristic::MistakeCorrecting { .. } => "mistake_correcting",
        }
    }

    /// Short suffix used in curve labels, e.g. `aa-E`.
    pub fn short(&self) -> &'static str {
        match self {
            Heuristic::Early => "E",
            Heuristic::Alternative { .. } => "A",
            Heuristic::Importance { .. } => "I",
            Heuristic::MistakeCorrecting { .. } => "MC",
        }
    }

    /// Builds a heuristic by name using `period` or `threshold` as needed.
    pub fn from_name(name: &str, period: usize, threshold: f64) -> Option<Self> {
        match name {
            "early" => Some(Heuristic::Early),
            "alternative" => Some(Heuristic::Alternative { period }),
            "importance" => Some(Heuristic::Importance { threshold }),
            "mistake_correcting" => Some(Heuristic::MistakeCorrecting { threshold }),
            _ => None,
        }
    }
}

/// Whether `heuristic` asks for advice at trial step `t`.
pub fn heuristic_fires(
    heuristic: &Heuristic,
    t: usize,
    student_action: usize,
    teacher_action: usize,
    importance_value: f64,
) -> bool {
    match *heuristic {
        Heuristic::Early => true,
        Heuristic::Alternative { period } => period > 0 && t.is_multiple_of(period),
        Heuristic::Importance { threshold } => importance_value > threshold,
        Heuristic::MistakeCorrecting { threshold } => {
            importance_value > threshold && student_action != teacher_action
        }
    }
}

/// Store an explanation only when the teacher's action is the distilled
/// tree's prediction and the tree is confident about it.
pub fn should_store<F: Scalar>(
    teacher_action: usize,
    prediction: (usize, F),
    storage_threshold: f64,
) -> bool {
    teacher_action == prediction.0 && prediction.1.to_f64().unwrap_or(0.0) > storage_threshold
}

/// Transfer rejection: the path tests a feature the target lacks
/// (`F_S - F_T`), or the state has a nonzero value in a feature the source
/// never exercised (`F_T - F_S`). Features are matched by name; `path_names`
/// names the tree's features and `state_names` those of `s`.
pub fn transfer_reject<F: Scalar>(
    path: Option<&DecisionPath<F>>,
    path_names: &[String],
    s: &[F],
    state_names: &[String],
    f_s: &BTreeSet<String>,
    f_t: &BTreeSet<String>,
) -> bool {
    let source_only = |name: &String| f_s.contains(name) && !f_t.contains(name);
    let target_only = |name: &String| f_t.contains(name) && !f_s.contains(name);
    let path_hit = path.is_some_and(|p| {
        p.steps
            .iter()
            .any(|step| path_names.get(step.feature).is_some_and(source_only))
    });
    path_hit
        || state_names
            .iter()
            .zip(s)
            .any(|(name, v)| target_only(name) && *v != F::zero())
}

/// Source and target feature spaces for advice given across environments.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferConfig {
    source_names: Vec<String>,
    target_names: Vec<String>,
    f_s: BTreeSet<String>,
    f_t: BTreeSet<String>,
    /// For each source feature, its index in the target vector.
    map: Vec<Option<usize>>,
}

impl TransferConfig {
    /// `f_s` and `f_t` are the features that vary in each environment,
    /// as indices into the respective spaces.
    pub fn new(
        source: &FeatureSpace,
        f_s: &BTreeSet<usize>,
        target: &FeatureSpace,
        f_t: &BTreeSet<usize>,
    ) -> Self {
        let source_names = source.names().to_vec();
        let target_names = target.names().to_vec();
        let map = source_names.iter().map(|n| target.index_of(n)).collect();
        TransferConfig {
            f_s: f_s.iter().map(|&i| source_names[i].clone()).collect(),
            f_t: f_t.iter().map(|&i| target_names[i].clone()).collect(),
            source_names,
            target_names,
            map,
        }
    }

    pub fn source_features(&self) -> &BTreeSet<String> {
        &self.f_s
    }

    pub fn target_features(&self) -> &BTreeSet<String> {
        &self.f_t
    }

    pub fn source_names(&self) -> &[String] {
        &self.source_names
    }

    /// The target state as the source-side teacher perceives it: features
    /// it knows, by name; features it has never seen are dropped.
    pub fn project<F: Scalar>(&self, s: &StateFeatures<F>) -> StateFeatures<F> {
        StateFeatures::new(
            self.map
                .iter()
                .map(|i| i.and_then(|i| s.get(i).copied()).unwrap_or_else(F::zero))
                .collect(),
        )
    }

    pub fn rejects<F: Scalar>(&self, path: Option<&DecisionPath<F>>, s: &StateFeatures<F>) -> bool {
        transfer_reject(
            path,
            &self.source_names,
            s,
            &self.target_names,
            &self.f_s,
            &self.f_t,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdvisingParams {
    pub mode: Mode,
    pub heuristic: Heuristic,
    pub budget: usize,
    pub decay: f64,
    pub storage_threshold: f64,
}

impl Default for AdvisingParams {
    fn default() -> Self {
        AdvisingParams {
            mode: Mode::Eaa,
            heuristic: Heuristic::Early,
            budget: 1000,
            decay: 0.999,
            storage_threshold: 0.8,
        }
    }
}

impl AdvisingParams {
    pub fn validate(&self) -> Result<(), AdvisingError> {
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(AdvisingError::Config(format!(
                "decay {} outside (0, 1]",
                self.decay
            )));
        }
        if !(0.0..=1.0).contains(&self.storage_threshold) {
            return Err(AdvisingError::Config(format!(
                "storage threshold {} outside [0, 1]",
                self.storage_threshold
            )));
        }
        if let Heuristic::Alternative { period: 0 } = self.heuristic {
            return Err(AdvisingError::Config(
                "alternative period must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Curve label such as `eaa-E` or `none`.
    pub fn label(&self) -> String {
        match self.mode {
            Mode::None | Mode::EaaExplore => self.mode.name().to_string(),
            m => format!("{}-{}", m.name(), self.heuristic.short()),
        }
    }
}

/// Per-agent advising state for one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct AdvisingSession {
    params: AdvisingParams,
    remaining: usize,
    iteration: usize,
    issued: usize,
    reused: usize,
    rejected: usize,
}

impl AdvisingSession {
    pub fn new(params: AdvisingParams) -> Result<Self, AdvisingError> {
        params.validate()?;
        Ok(AdvisingSession {
            remaining: params.budget,
            params,
            iteration: 0,
            issued: 0,
            reused: 0,
            rejected: 0,
        })
    }

    pub fn params(&self) -> &AdvisingParams {
        &self.params
    }

    pub fn mode(&self) -> Mode {
        self.params.mode
    }

    pub fn budget(&self) -> usize {
        self.params.budget
    }

    pub fn remaining(&self) -> usize {
        self.remaining
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn set_iteration(&mut self, j: usize) {
        self.iteration = j;
    }

    /// Called once per finished episode.
    pub fn advance_iteration(&mut self) {
        self.iteration += 1;
    }

    pub fn advice_issued(&self) -> usize {
        self.issued
    }

    pub fn advice_reused(&self) -> usize {
        self.reused
    }

    pub fn advice_rejected(&self) -> usize {
        self.rejected
    }

    pub fn exhausted(&self) -> bool {
        self.remaining == 0
    }

    /// `decay^j`.
    pub fn reuse_probability(&self) -> f64 {
        let j = i32::try_from(self.iteration).unwrap_or(i32::MAX);
        self.params.decay.powi(j)
    }

    fn spend(&mut self) {
        debug_assert!(self.remaining > 0);
        self.remaining -= 1;
        self.issued += 1;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Source {
    Reused,
    Advised,
    Own,
    Explored,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Reused => "reused",
            Source::Advised => "advised",
            Source::Own => "own",
            Source::Explored => "explored",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepDecision<F: Scalar> {
    pub source: Source,
    pub action: usize,
    /// The stored explanation, when advice was issued and kept.
    pub explanation: Option<DecisionPath<F>>,
    pub rejected_advice: bool,
}

impl<F: Scalar> StepDecision<F> {
    fn plain(source: Source, action: usize) -> Self {
        StepDecision {
            source,
            action,
            explanation: None,
            rejected_advice: false,
        }
    }
}

/// What one agent's teacher brings: its Q-table, the distilled tree (for
/// explainable modes) and, across environments, the transfer mapping.
#[derive(Clone, Copy, Debug)]
pub struct AgentTeacher<'a, F: Scalar> {
    pub q: Option<&'a QTable<F>>,
    pub tree: Option<&'a DecisionTreePolicy<F>>,
    pub transfer: Option<&'a TransferConfig>,
}

impl<F: Scalar> AgentTeacher<'_, F> {
    /// The student's state in the teacher's feature space.
    pub fn view(&self, s: &StateFeatures<F>) -> StateFeatures<F> {
        match self.transfer {
            Some(tc) => tc.project(s),
            None => s.clone(),
        }
    }
}

/// One step's inputs for one agent.
#[derive(Clone, Copy, Debug)]
pub struct StepInput<'a, F: Scalar> {
    pub state: &'a StateFeatures<F>,
    pub valid: &'a [usize],
    /// Step counter across the whole trial.
    pub t: usize,
    pub epsilon: F,
}

/// Dispatches on the session's mode. Every mode draws the same random
/// numbers up front (one reuse draw, then the student's epsilon-greedy
/// draws), so matched seeds stay aligned across modes; only exploration in
/// [`Mode::EaaExplore`] draws more.
pub fn decide<F: Scalar, R: Rng + ?Sized>(
    session: &mut AdvisingSession,
    partial: &mut PartialTree<F>,
    teacher: &AgentTeacher<'_, F>,
    student: &QTable<F>,
    input: StepInput<'_, F>,
    rng: &mut R,
) -> Result<StepDecision<F>, AdvisingError> {
    let u: f64 = rng.gen();
    let own = act_epsilon_greedy(student, input.state, input.valid, input.epsilon, rng)?;
    Ok(match session.mode() {
        Mode::None => StepDecision::plain(Source::Own, own),
        Mode::Aa => aa_step(session, teacher, input, own),
        Mode::Eaa | Mode::EaaAlwaysAccept => eaa_step(session, partial, teacher, input, own, u),
        Mode::EaaExplore => reflect_explore(session, partial, teacher.transfer, input, own, u, rng),
    })
}

/// Teacher's greedy action and importance at the teacher's view of `s`.
fn consult<F: Scalar>(q: &QTable<F>, view: &StateFeatures<F>, valid: &[usize]) -> (usize, f64) {
    let action = q.greedy_action(view, valid).unwrap_or(0);
    let imp = importance(q, view, valid).to_f64().unwrap_or(0.0);
    (action, imp)
}

/// Reuse, advise, or act on one's own. `own` is the student's
/// epsilon-greedy action and `u` a uniform draw deciding reuse.
pub fn eaa_step<F: Scalar>(
    session: &mut AdvisingSession,
    partial: &mut PartialTree<F>,
    teacher: &AgentTeacher<'_, F>,
    input: StepInput<'_, F>,
    own: usize,
    u: f64,
) -> StepDecision<F> {
    let view = teacher.view(input.state);
    let rejecting = session.mode() == Mode::Eaa;

    if let Some(path) = partial.path_for(&view) {
        if u < session.reuse_probability() {
            let reject = rejecting
                && teacher
                    .transfer
                    .is_some_and(|tc| tc.rejects(Some(&path), input.state));
            if !reject {
                session.reused += 1;
                return StepDecision::plain(Source::Reused, path.action);
            }
        }
    }

    let Some(q) = teacher.q else {
        return StepDecision::plain(Source::Own, own);
    };
    if session.remaining == 0 {
        return StepDecision::plain(Source::Own, own);
    }
    let (advice, imp) = consult(q, &view, input.valid);
    if !heuristic_fires(&session.params.heuristic, input.t, own, advice, imp) {
        return StepDecision::plain(Source::Own, own);
    }
    session.spend();

    let path = teacher.tree.and_then(|tree| tree.extract_path(&view).ok());
    if rejecting {
        if let Some(tc) = teacher.transfer {
            if tc.rejects(path.as_ref(), input.state) {
                session.rejected += 1;
                return StepDecision {
                    source: Source::Own,
                    action: own,
                    explanation: None,
                    rejected_advice: true,
                };
            }
        }
    }
    let explanation = path.filter(|p| {
        should_store(
            advice,
            (p.action, p.probability),
            session.params.storage_threshold,
        ) && partial.store_path(p).is_ok()
    });
    StepDecision {
        source: Source::Advised,
        action: advice,
        explanation,
        rejected_advice: false,
    }
}

/// Plain advising: no memory, no explanations.
pub fn aa_step<F: Scalar>(
    session: &mut AdvisingSession,
    teacher: &AgentTeacher<'_, F>,
    input: StepInput<'_, F>,
    own: usize,
) -> StepDecision<F> {
    let Some(q) = teacher.q else {
        return StepDecision::plain(Source::Own, own);
    };
    if session.remaining == 0 {
        return StepDecision::plain(Source::Own, own);
    }
    let view = teacher.view(input.state);
    let (advice, imp) = consult(q, &view, input.valid);
    if !heuristic_fires(&session.params.heuristic, input.t, own, advice, imp) {
        return StepDecision::plain(Source::Own, own);
    }
    session.spend();
    StepDecision::plain(Source::Advised, advice)
}

/// Teacher-less reuse with reflection. When the student would reuse a
/// stored path (probability `decay^j`) but transfer rejection flags it, it
/// explores with a uniform valid action instead. Without a transfer config
/// this is reuse-or-own.
pub fn reflect_explore<F: Scalar, R: Rng + ?Sized>(
    session: &mut AdvisingSession,
    partial: &PartialTree<F>,
    transfer: Option<&TransferConfig>,
    input: StepInput<'_, F>,
    own: usize,
    u: f64,
    rng: &mut R,
) -> StepDecision<F> {
    let view = match transfer {
        Some(tc) => tc.project(input.state),
        None => input.state.clone(),
    };
    if let Some(path) = partial.path_for(&view) {
        if u < session.reuse_probability() {
            if transfer.is_some_and(|tc| tc.rejects(Some(&path), input.state))
                && !input.valid.is_empty()
            {
                let a = input.valid[rng.gen_range(0..input.valid.len())];
                return StepDecision::plain(Source::Explored, a);
            }
            session.reused += 1;
            return StepDecision::plain(Source::Reused, path.action);
        }
    }
    StepDecision::plain(Source::Own, own)
}

/// One audit line of a decision trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub episode: usize,
    pub step: usize,
    pub agent: String,
    pub source: Source,
    pub action: usize,
    pub remaining: usize,
    pub rejected: bool,
}

/// Writes `episode,step,agent,source,action,remaining,rejected` rows.
pub fn write_trace<W: io::Write>(rows: &[TraceRow], out: W) -> Result<(), AdvisingError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "episode",
        "step",
        "agent",
        "source",
        "action",
        "remaining",
        "rejected",
    ])
    .map_err(csv_io)?;
    for r in rows {
        w.write_record([
            r.episode.to_string(),
            r.step.to_string(),
            r.agent.clone(),
            r.source.name().to_string(),
            r.action.to_string(),
            r.remaining.to_string(),
            u8::from(r.rejected).to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> AdvisingError {
    AdvisingError::Io(io::Error::other(e))
}
