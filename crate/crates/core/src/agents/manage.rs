//! Management Agent: picks the phase of the next round.

use serde::{Deserialize, Serialize};

use super::{EvaluationReport, Phase};
use crate::llm::{prompts, CompletionRequest, Gateway, ModelRole};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleThresholds {
    /// Rounds at the start that always generate.
    pub warmup: u32,
    /// Consecutive generation rounds before switching to expansion.
    pub gen_cycles: u32,
    /// Expansion stops when mean neighbour similarity exceeds this.
    pub theta_red: f64,
    /// Expansion stops when the executable fraction falls below this.
    pub theta_exec: f64,
}

impl Default for ScheduleThresholds {
    fn default() -> Self {
        ScheduleThresholds { warmup: 3, gen_cycles: 5, theta_red: 0.85, theta_exec: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManagePolicy {
    #[default]
    Rule,
    LlmAdvised,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecisionReason {
    Warmup,
    /// Still inside the generation burst.
    Explore,
    RedundancyHigh,
    ExecutabilityLow,
    ExploitOk,
    /// Expansion was due but no pooled query touched the selected tables.
    EmptySeeds,
    /// The reasoner's advice differed from the rule and passed the guards.
    Advised,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDecision {
    pub next_phase: Phase,
    pub reason: DecisionReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advisory_text: Option<String>,
}

impl PhaseDecision {
    fn rule(next_phase: Phase, reason: DecisionReason) -> Self {
        PhaseDecision { next_phase, reason, advisory_text: None }
    }
}

/// Inputs the decision may depend on. Under the rule policy the decision
/// is a pure function of this, the report and the thresholds.
#[derive(Clone, Debug, PartialEq)]
pub struct ManageInput<'a> {
    /// Phase of the round just evaluated.
    pub phase: Phase,
    /// Consecutive generation rounds up to and including that round.
    pub gen_streak: u32,
    pub pool_size: usize,
    pub expansion_ratio: f64,
    pub table_stats: &'a str,
    pub neighbors: &'a str,
}

fn rule_decision(input: &ManageInput<'_>, report: &EvaluationReport, th: &ScheduleThresholds) -> PhaseDecision {
    if report.round + 1 < th.warmup {
        return PhaseDecision::rule(Phase::Gen, DecisionReason::Warmup);
    }
    match input.phase {
        Phase::Gen if input.gen_streak >= th.gen_cycles => PhaseDecision::rule(Phase::Exp, DecisionReason::ExploitOk),
        Phase::Gen => PhaseDecision::rule(Phase::Gen, DecisionReason::Explore),
        Phase::Exp if report.mean_max_neighbor_similarity > th.theta_red => {
            PhaseDecision::rule(Phase::Gen, DecisionReason::RedundancyHigh)
        }
        Phase::Exp if report.executable_fraction < th.theta_exec => {
            PhaseDecision::rule(Phase::Gen, DecisionReason::ExecutabilityLow)
        }
        Phase::Exp => PhaseDecision::rule(Phase::Exp, DecisionReason::ExploitOk),
    }
}

/// `GEN` or `EXP` from the last `DECISION:` line of an answer.
pub fn parse_advice(answer: &str) -> Option<Phase> {
    answer.lines().rev().find_map(|l| {
        let upper = l.to_ascii_uppercase();
        let rest = &upper[upper.find("DECISION:")? + "DECISION:".len()..];
        let word = rest.split(|c: char| !c.is_ascii_alphabetic()).find(|w| !w.is_empty())?;
        Phase::parse(word)
    })
}

/// Chooses the next phase. The advised policy asks the reasoner, then
/// applies hard guards: warm-up always generates, and expansion never
/// continues when both the redundancy and the executability triggers fire.
/// A guard violation, an unparseable answer or a gateway failure falls back
/// to the rule decision.
pub fn manage_decide(
    input: &ManageInput<'_>,
    report: &EvaluationReport,
    th: &ScheduleThresholds,
    policy: ManagePolicy,
    gateway: Option<&Gateway>,
) -> PhaseDecision {
    let rule = rule_decision(input, report, th);
    let (ManagePolicy::LlmAdvised, Some(gw)) = (policy, gateway) else {
        return rule;
    };
    if rule.reason == DecisionReason::Warmup {
        return rule;
    }
    let prompt = prompts::render(
        prompts::MANAGEMENT,
        &[
            ("phase", input.phase.as_str()),
            ("round", &report.round.to_string()),
            ("gen_streak", &input.gen_streak.to_string()),
            ("pool_size", &input.pool_size.to_string()),
            ("ratio", &format!("{:.3}", input.expansion_ratio)),
            ("batch", &report.batch_size.to_string()),
            ("exec", &format!("{:.3}", report.executable_fraction)),
            ("accepted", &report.accepted.to_string()),
            ("similarity", &format!("{:.3}", report.mean_max_neighbor_similarity)),
            ("table_stats", input.table_stats),
            ("neighbors", input.neighbors),
        ],
    );
    let answer = match gw.complete(&CompletionRequest::for_role(ModelRole::Reasoner, prompt)) {
        Ok(a) => a,
        Err(e) => {
            tracing::warn!("management advice unavailable: {e}");
            return rule;
        }
    };
    let Some(advice) = parse_advice(&answer) else {
        return PhaseDecision { advisory_text: Some(answer), ..rule };
    };
    let both_fire = report.mean_max_neighbor_similarity > th.theta_red && report.executable_fraction < th.theta_exec;
    let guarded = advice == Phase::Exp && input.phase == Phase::Exp && both_fire;
    if guarded || advice == rule.next_phase {
        return PhaseDecision { advisory_text: Some(answer), ..rule };
    }
    PhaseDecision { next_phase: advice, reason: DecisionReason::Advised, advisory_text: Some(answer) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{RetryPolicy, ScriptedBackend, ScriptedFixture};
    use std::sync::Arc;

    fn input(phase: Phase, gen_streak: u32) -> ManageInput<'static> {
        ManageInput { phase, gen_streak, pool_size: 10, expansion_ratio: 0.5, table_stats: "", neighbors: "" }
    }

    fn report(round: u32, phase: Phase, sim: f64, exec: f64) -> EvaluationReport {
        let mut r = EvaluationReport::empty(round, phase);
        r.mean_max_neighbor_similarity = sim;
        r.executable_fraction = exec;
        r
    }

    fn decide(i: &ManageInput<'_>, r: &EvaluationReport) -> PhaseDecision {
        manage_decide(i, r, &ScheduleThresholds::default(), ManagePolicy::Rule, None)
    }

    #[test]
    fn rule_policy() {
        let d = decide(&input(Phase::Gen, 1), &report(0, Phase::Gen, 0.0, 1.0));
        assert_eq!((d.next_phase, d.reason), (Phase::Gen, DecisionReason::Warmup));
        let d = decide(&input(Phase::Gen, 4), &report(3, Phase::Gen, 0.0, 1.0));
        assert_eq!((d.next_phase, d.reason), (Phase::Gen, DecisionReason::Explore));
        let d = decide(&input(Phase::Gen, 5), &report(4, Phase::Gen, 0.0, 1.0));
        assert_eq!((d.next_phase, d.reason), (Phase::Exp, DecisionReason::ExploitOk));
        let d = decide(&input(Phase::Exp, 0), &report(9, Phase::Exp, 0.95, 1.0));
        assert_eq!((d.next_phase, d.reason), (Phase::Gen, DecisionReason::RedundancyHigh));
        let d = decide(&input(Phase::Exp, 0), &report(9, Phase::Exp, 0.6, 0.4));
        assert_eq!((d.next_phase, d.reason), (Phase::Gen, DecisionReason::ExecutabilityLow));
        let d = decide(&input(Phase::Exp, 0), &report(9, Phase::Exp, 0.6, 0.9));
        assert_eq!((d.next_phase, d.reason), (Phase::Exp, DecisionReason::ExploitOk));
    }

    fn advised(answer: &str, i: &ManageInput<'_>, r: &EvaluationReport) -> PhaseDecision {
        let mut f = ScriptedFixture::default();
        f.push_sequence(ModelRole::Reasoner, 0, answer);
        let gw = Gateway::new("t", RetryPolicy::default(), 1)
            .with_backend(ModelRole::Reasoner, Arc::new(ScriptedBackend::new(f)));
        manage_decide(i, r, &ScheduleThresholds::default(), ManagePolicy::LlmAdvised, Some(&gw))
    }

    #[test]
    fn advice_within_guards_is_followed() {
        let d = advised("Diversity is fine.\nDECISION: EXP", &input(Phase::Gen, 2), &report(5, Phase::Gen, 0.3, 1.0));
        assert_eq!((d.next_phase, d.reason), (Phase::Exp, DecisionReason::Advised));
        assert!(d.advisory_text.unwrap().contains("Diversity"));
    }

    #[test]
    fn guards_override_advice() {
        let d = advised("DECISION: EXP", &input(Phase::Exp, 0), &report(8, Phase::Exp, 0.95, 0.2));
        assert_eq!((d.next_phase, d.reason), (Phase::Gen, DecisionReason::RedundancyHigh));
        let d = advised("no idea", &input(Phase::Exp, 0), &report(8, Phase::Exp, 0.5, 0.9));
        assert_eq!((d.next_phase, d.reason), (Phase::Exp, DecisionReason::ExploitOk));
        // Warm-up never consults the model, so the fixture is not consumed.
        let d = advised("DECISION: EXP", &input(Phase::Gen, 1), &report(0, Phase::Gen, 0.0, 1.0));
        assert_eq!(d.reason, DecisionReason::Warmup);
    }

    #[test]
    fn advice_parsing() {
        assert_eq!(parse_advice("think...\nDecision: gen because"), Some(Phase::Gen));
        assert_eq!(parse_advice("DECISION: **EXP**"), Some(Phase::Exp));
        assert_eq!(parse_advice("EXP"), None);
    }
}
