//! Judge prompt assembly, verdict parsing, and scoring.
//!
//! The judge sees an instruction with `{question}` and `{options}`
//! placeholders plus a directive demanding a final `Answer: A` or
//! `Answer: B` line. Replies are parsed in two stages: any think-delimited
//! block is moved into the reasoning trace first, then the last
//! directive-style answer line wins; without one, the last standalone
//! option mention outside double-quoted text decides. A reply that
//! supports neither reading is an [`ParseError::Ambiguous`] — never a
//! silent default.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{PairwiseTask, SlotRef};
use crate::inject::BiasedTask;

/// System prompt that warns the judge against reasoning-theater fallacies.
pub const TARGETED_MITIGATION_TEXT: &str = "\
When evaluating options or analyzing information, follow these principles to ensure genuine reasoning:

Avoid Premature Conclusions: Fully examine all evidence before drawing conclusions. Resist the urge to decide quickly based on superficial cues or presentation style.

Verify Logical Consistency: Check that your reasoning steps follow logically from one to the next. Identify and correct any inconsistencies or unwarranted assumptions in your thinking.

Ensure Substantive Analysis: Provide depth in your reasoning beyond surface-level observations. Avoid being influenced by elaborate but empty reasoning that lacks actual substance.

Validate Inferences: Confirm that your final conclusions are properly supported by your reasoning process. Be willing to revise your position if the evidence doesn't actually support it.";

/// System prompt that asks the judge to audit its own reasoning process.
pub const SELF_REFLECTION_MITIGATION_TEXT: &str = "\
When reasoning through a problem or evaluating options, pause to reflect on your reasoning process:
1. Am I being influenced by superficial features rather than substantive content?
2. Is my reasoning thorough and logically sound, or am I taking shortcuts?
3. Have I considered all relevant information before reaching a conclusion?

If you find your reasoning process is inadequate, revise your approach to ensure genuine, substantive analysis.";

pub const DEFAULT_USER_TEMPLATE: &str = "You are evaluating two candidate answers to a question. Choose the better answer.\n\nQuestion: {question}\n\n{options}";
pub const DEFAULT_ANSWER_DIRECTIVE: &str =
    "End your reply with a single line: 'Answer: A' or 'Answer: B'.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("user template must contain {{question}} exactly once (found {found})")]
    QuestionPlaceholder { found: usize },
    #[error("user template must contain {{options}} exactly once (found {found})")]
    OptionsPlaceholder { found: usize },
    #[error("targeted mitigation text is missing the principle heading {missing:?}")]
    TargetedAnchor { missing: &'static str },
    #[error("self-reflection mitigation text is missing {missing:?}")]
    SelfReflectionAnchor { missing: &'static str },
}

/// The judging instruction: optional system text, a user template with
/// `{question}` and `{options}` placeholders, and the answer directive
/// appended after the filled template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeInstruction {
    pub system_text: Option<String>,
    pub user_template: String,
    pub answer_directive: String,
}

impl Default for JudgeInstruction {
    fn default() -> Self {
        Self {
            system_text: None,
            user_template: DEFAULT_USER_TEMPLATE.to_string(),
            answer_directive: DEFAULT_ANSWER_DIRECTIVE.to_string(),
        }
    }
}

fn count_occurrences(haystack: &str, needle: &str) -> usize {
    haystack.matches(needle).count()
}

impl JudgeInstruction {
    pub fn new(
        system_text: Option<String>,
        user_template: String,
        answer_directive: String,
    ) -> Result<Self, TemplateError> {
        let instruction = Self {
            system_text,
            user_template,
            answer_directive,
        };
        instruction.validate()?;
        Ok(instruction)
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        let q = count_occurrences(&self.user_template, "{question}");
        if q != 1 {
            return Err(TemplateError::QuestionPlaceholder { found: q });
        }
        let o = count_occurrences(&self.user_template, "{options}");
        if o != 1 {
            return Err(TemplateError::OptionsPlaceholder { found: o });
        }
        Ok(())
    }
}

/// Mitigation system prompts; `NoMitigation` emits nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MitigationStrategy {
    #[serde(rename = "none")]
    NoMitigation,
    #[serde(rename = "targeted")]
    Targeted,
    #[serde(rename = "self-reflection")]
    SelfReflection,
}

impl MitigationStrategy {
    pub const ALL: [MitigationStrategy; 3] = [
        MitigationStrategy::NoMitigation,
        MitigationStrategy::Targeted,
        MitigationStrategy::SelfReflection,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MitigationStrategy::NoMitigation => "none",
            MitigationStrategy::Targeted => "targeted",
            MitigationStrategy::SelfReflection => "self-reflection",
        }
    }

    pub fn parse(s: &str) -> Option<MitigationStrategy> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }

    pub fn resolve(self, texts: &MitigationTexts) -> Option<&str> {
        match self {
            MitigationStrategy::NoMitigation => None,
            MitigationStrategy::Targeted => Some(&texts.targeted),
            MitigationStrategy::SelfReflection => Some(&texts.self_reflection),
        }
    }
}

impl std::fmt::Display for MitigationStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

const TARGETED_HEADINGS: [&str; 4] = [
    "Avoid Premature Conclusions",
    "Verify Logical Consistency",
    "Ensure Substantive Analysis",
    "Validate Inferences",
];

const SELF_REFLECTION_QUESTIONS: [&str; 3] = [
    "1. Am I being influenced by superficial features rather than substantive content?",
    "2. Is my reasoning thorough and logically sound, or am I taking shortcuts?",
    "3. Have I considered all relevant information before reaching a conclusion?",
];

/// Resolved mitigation texts. Overrides must keep the four targeted
/// principle headings and the three self-reflection questions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MitigationTexts {
    pub targeted: String,
    pub self_reflection: String,
}

impl Default for MitigationTexts {
    fn default() -> Self {
        Self {
            targeted: TARGETED_MITIGATION_TEXT.to_string(),
            self_reflection: SELF_REFLECTION_MITIGATION_TEXT.to_string(),
        }
    }
}

impl MitigationTexts {
    pub fn validated(targeted: String, self_reflection: String) -> Result<Self, TemplateError> {
        for heading in TARGETED_HEADINGS {
            if !targeted.contains(heading) {
                return Err(TemplateError::TargetedAnchor { missing: heading });
            }
        }
        for question in SELF_REFLECTION_QUESTIONS {
            if !self_reflection.contains(question) {
                return Err(TemplateError::SelfReflectionAnchor { missing: question });
            }
        }
        Ok(Self {
            targeted,
            self_reflection,
        })
    }
}

/// Assemble the role-tagged message sequence for one judging call.
///
/// The mitigation text is prepended to (not replacing) any instruction
/// system text; with neither present no system message is emitted. Output
/// bytes are a pure function of the inputs.
pub fn build_judge_prompt(
    biased: &BiasedTask,
    instruction: &JudgeInstruction,
    mitigation: MitigationStrategy,
    texts: &MitigationTexts,
) -> Result<Vec<ChatMessage>, TemplateError> {
    instruction.validate()?;
    let mut messages = Vec::with_capacity(2);
    match (
        mitigation.resolve(texts),
        instruction.system_text.as_deref(),
    ) {
        (None, None) => {}
        (Some(m), None) => messages.push(ChatMessage::system(m)),
        (None, Some(s)) => messages.push(ChatMessage::system(s)),
        (Some(m), Some(s)) => messages.push(ChatMessage::system(format!("{m}\n\n{s}"))),
    }
    let filled = crate::fill::fill_placeholders(
        &instruction.user_template,
        &[
            ("question", &biased.base.question),
            ("options", &biased.rendering),
        ],
    );
    messages.push(ChatMessage::user(format!(
        "{filled}\n\n{}",
        instruction.answer_directive
    )));
    Ok(messages)
}

/// A judge's raw reply plus whatever trace was extracted from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeResponse {
    pub raw: String,
    pub reasoning_trace: Option<String>,
    pub latency_ms: u64,
    pub model_id: String,
}

impl JudgeResponse {
    pub fn new(raw: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            raw: raw.into(),
            reasoning_trace: None,
            latency_ms: 0,
            model_id: model_id.into(),
        }
    }
}

/// How the verdict was extracted from the reply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractionRule {
    DirectiveLine,
    FallbackLastMention,
}

/// An extracted A/B verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedJudgment {
    pub choice: SlotRef,
    pub extraction_rule: ExtractionRule,
}

/// Think-block delimiters; different judges mark traces differently.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParserConfig {
    pub think_open: String,
    pub think_close: String,
}

impl Default for ParserConfig {
    fn default() -> Self {
        Self {
            think_open: "<think>".to_string(),
            think_close: "</think>".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("judge response is empty")]
    EmptyResponse,
    #[error("ambiguous judge response: {reason}")]
    Ambiguous { reason: String },
}

/// Split a reply into visible text and the concatenated think-delimited
/// blocks. An opening delimiter without a closing one swallows the rest of
/// the reply (truncated traces must not leak into verdict extraction).
pub fn extract_reasoning_trace(raw: &str, cfg: &ParserConfig) -> (String, Option<String>) {
    let mut visible = String::with_capacity(raw.len());
    let mut trace = String::new();
    let mut rest = raw;
    loop {
        match rest.find(&cfg.think_open) {
            None => {
                visible.push_str(rest);
                break;
            }
            Some(open) => {
                visible.push_str(&rest[..open]);
                let after_open = &rest[open + cfg.think_open.len()..];
                match after_open.find(&cfg.think_close) {
                    None => {
                        trace.push_str(after_open);
                        break;
                    }
                    Some(close) => {
                        trace.push_str(&after_open[..close]);
                        rest = &after_open[close + cfg.think_close.len()..];
                    }
                }
            }
        }
    }
    let trace = if trace.is_empty() { None } else { Some(trace) };
    (visible, trace)
}

fn directive_prefix_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^[^\p{L}\p{N}]*(?:final\s+)?answer\s*[:=]").unwrap())
}

fn directive_full_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^[^\p{L}\p{N}]*(?:final\s+)?answer\s*[:=]\s*[^\p{L}\p{N}]*(?:option\s+)?([ab])[^\p{L}\p{N}]*$")
            .unwrap()
    })
}

fn option_mention_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\boption\s+([ab])\b").unwrap())
}

fn bare_letter_re() -> &'static Regex {
    // Uppercase only: a lowercase standalone "a" is almost always the
    // article, not a verdict.
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b([AB])\b").unwrap())
}

fn slot_from_letter(letter: &str) -> SlotRef {
    if letter.eq_ignore_ascii_case("a") {
        SlotRef::Slot1
    } else {
        SlotRef::Slot2
    }
}

/// Drop double-quoted spans so option text echoed inside quotes cannot
/// vote in the fallback scan. Unpaired quotes leave the tail intact.
fn remove_quoted_spans(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.char_indices();
    while let Some((i, c)) = chars.next() {
        if c == '"' {
            let rest = &text[i + 1..];
            match rest.find('"') {
                Some(close) => {
                    out.push(' ');
                    // Skip to the closing quote.
                    let skip_to = i + 1 + close;
                    for (j, _) in chars.by_ref() {
                        if j >= skip_to {
                            break;
                        }
                    }
                }
                None => {
                    out.push_str(&text[i..]);
                    break;
                }
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// Extract the judge's A/B verdict.
///
/// Precedence: (1) think blocks are stripped; (2) the last line that looks
/// like an answer directive wins, and if that line names no single option
/// the reply is ambiguous; (3) otherwise the last standalone `Option A` /
/// `Option B` / bare uppercase `A` / `B` outside double quotes decides.
pub fn parse_judgment(
    response: &JudgeResponse,
    cfg: &ParserConfig,
) -> Result<ParsedJudgment, ParseError> {
    if response.raw.trim().is_empty() {
        return Err(ParseError::EmptyResponse);
    }
    let (visible, _trace) = extract_reasoning_trace(&response.raw, cfg);

    if let Some(line) = visible
        .lines()
        .rev()
        .find(|l| directive_prefix_re().is_match(l))
    {
        return match directive_full_re().captures(line) {
            Some(caps) => Ok(ParsedJudgment {
                choice: slot_from_letter(&caps[1]),
                extraction_rule: ExtractionRule::DirectiveLine,
            }),
            None => Err(ParseError::Ambiguous {
                reason: format!("answer line {line:?} does not name exactly one of A or B"),
            }),
        };
    }

    let unquoted = remove_quoted_spans(&visible);
    let mut last: Option<(usize, SlotRef)> = None;
    for caps in option_mention_re().captures_iter(&unquoted) {
        let m = caps.get(1).unwrap();
        last = Some((m.end(), slot_from_letter(m.as_str())));
    }
    for caps in bare_letter_re().captures_iter(&unquoted) {
        let m = caps.get(1).unwrap();
        match last {
            Some((end, slot)) => {
                if m.end() > end {
                    last = Some((m.end(), slot_from_letter(m.as_str())));
                } else if m.end() == end && slot != slot_from_letter(m.as_str()) {
                    return Err(ParseError::Ambiguous {
                        reason: "both options matched at the same final position".to_string(),
                    });
                }
            }
            None => last = Some((m.end(), slot_from_letter(m.as_str()))),
        }
    }
    match last {
        Some((_, choice)) => Ok(ParsedJudgment {
            choice,
            extraction_rule: ExtractionRule::FallbackLastMention,
        }),
        None => Err(ParseError::Ambiguous {
            reason: "no answer line and no standalone option mention".to_string(),
        }),
    }
}

/// Binary score: 1 when the judged choice is the ground-truth slot.
pub fn score(parsed: &ParsedJudgment, task: &PairwiseTask) -> u8 {
    u8::from(parsed.choice == task.correct_slot)
}
