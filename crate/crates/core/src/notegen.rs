//! Prompt planning and rendering for clinical notes.
//!
//! A [`PromptPlan`] fixes every random choice for one record: which symptoms
//! are mentioned, in which order, with which descriptor. Rendering a plan is
//! then a pure template fill, so the same plan always yields the same prompt.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::Network;
use crate::par::Execution;
use crate::sampler::{record_rng, PatientRecord};

pub const SYMPTOMS: [&str; 5] = ["dyspnea", "cough", "pain", "fever", "nasal"];
pub const CONDITIONS: [&str; 4] = ["asthma", "smoking", "COPD", "hay_fever"];

/// Causes that take precedence over all others when choosing a descriptor,
/// strongest first.
pub const DOMINANT_CAUSES: [&str; 2] = ["pneumonia", "common_cold"];

/// Line separating the three notes of a generic special-case completion.
pub const GENERIC_DELIMITER: &str = "###";

/// Notes produced by one generic special-case completion.
pub const GENERIC_BATCH: usize = 3;

const PLAN_SALT: u64 = 0x6e6f_7465_706c_616e;

#[derive(Debug, Error)]
pub enum NoteError {
    #[error("network has no variable `{0}`")]
    UnknownVariable(String),
    #[error("`{0}` must have a negative first state")]
    BadSymptom(String),
    #[error("plan does not match record {record}: {reason}")]
    PlanMismatch { record: u64, reason: String },
    #[error("cannot compact an empty note")]
    EmptyNote,
    #[error("descriptor bank: {0}")]
    Bank(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Probability of mentioning a symptom in the prompt, per symptom and state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MentionPolicy {
    pub rates: BTreeMap<String, BTreeMap<String, f64>>,
}

impl Default for MentionPolicy {
    fn default() -> Self {
        let table: [(&str, &[(&str, f64)]); 5] = [
            ("dyspnea", &[("yes", 0.95), ("no", 0.75)]),
            ("cough", &[("yes", 0.95), ("no", 0.9)]),
            ("pain", &[("yes", 0.75), ("no", 0.3)]),
            ("fever", &[("high", 0.95), ("low", 0.7), ("none", 0.4)]),
            ("nasal", &[("yes", 0.95), ("no", 0.1)]),
        ];
        let rates = table
            .iter()
            .map(|(s, states)| (s.to_string(), states.iter().map(|(k, p)| (k.to_string(), *p)).collect()))
            .collect();
        MentionPolicy { rates }
    }
}

impl MentionPolicy {
    /// Unlisted states are never mentioned.
    pub fn rate(&self, symptom: &str, state: &str) -> f64 {
        self.rates.get(symptom).and_then(|m| m.get(state)).copied().unwrap_or(0.0)
    }
}

/// Descriptor phrases keyed by symptom, then by causing variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DescriptorBank {
    pub entries: BTreeMap<String, BTreeMap<String, Vec<String>>>,
}

impl Default for DescriptorBank {
    fn default() -> Self {
        serde_json::from_str(include_str!("../data/descriptors.json")).expect("bundled descriptor bank parses")
    }
}

impl DescriptorBank {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, NoteError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn phrases(&self, symptom: &str, cause: &str) -> &[String] {
        self.entries.get(symptom).and_then(|m| m.get(cause)).map_or(&[], Vec::as_slice)
    }

    /// Keys that are not (symptom, parent) pairs of `net`. Such entries can
    /// never be selected.
    pub fn unreachable(&self, net: &Network) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (symptom, causes) in &self.entries {
            let parents: Vec<&str> = match net.index_of(symptom) {
                Ok(v) => net.parents(v).iter().map(|&p| net.variable(p).name.as_str()).collect(),
                Err(_) => Vec::new(),
            };
            for cause in causes.keys() {
                if !parents.contains(&cause.as_str()) {
                    out.push((symptom.clone(), cause.clone()));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
struct Cause {
    name: String,
    var: usize,
    on: u32,
}

#[derive(Clone, Debug)]
struct SymptomSlot {
    name: String,
    var: usize,
    causes: Vec<Cause>,
}

/// Symptom and condition variables resolved against a network.
#[derive(Clone, Debug)]
pub struct NoteContext {
    symptoms: Vec<SymptomSlot>,
    conditions: Vec<Cause>,
    states: Vec<Vec<String>>,
}

fn yes_state(net: &Network, var: usize) -> Option<u32> {
    net.variable(var).state_index("yes").map(|s| s as u32)
}

impl NoteContext {
    pub fn new(net: &Network) -> Result<Self, NoteError> {
        let find = |name: &str| net.index_of(name).map_err(|_| NoteError::UnknownVariable(name.to_string()));
        let mut symptoms = Vec::new();
        for name in SYMPTOMS {
            let var = find(name)?;
            let first = &net.variable(var).states[0];
            if first != "no" && first != "none" {
                return Err(NoteError::BadSymptom(name.to_string()));
            }
            let causes = net
                .parents(var)
                .iter()
                .filter_map(|&p| yes_state(net, p).map(|on| Cause { name: net.variable(p).name.clone(), var: p, on }))
                .collect();
            symptoms.push(SymptomSlot { name: name.to_string(), var, causes });
        }
        let mut conditions = Vec::new();
        for name in CONDITIONS {
            let var = find(name)?;
            let on = yes_state(net, var).ok_or_else(|| NoteError::BadSymptom(name.to_string()))?;
            conditions.push(Cause { name: name.to_string(), var, on });
        }
        let states = net.variables().iter().map(|v| v.states.clone()).collect();
        Ok(NoteContext { symptoms, conditions, states })
    }

    fn slot(&self, symptom: &str) -> Option<&SymptomSlot> {
        self.symptoms.iter().find(|s| s.name == symptom)
    }

    fn state_label(&self, var: usize, value: u32) -> &str {
        &self.states[var][value as usize]
    }

    /// Causes of `symptom` that are switched on in `record`.
    pub fn active_causes(&self, symptom: &str, record: &PatientRecord) -> Vec<String> {
        self.slot(symptom)
            .map(|s| s.causes.iter().filter(|c| record.get(c.var) == c.on).map(|c| c.name.clone()).collect())
            .unwrap_or_default()
    }

    /// True when every symptom is in its negative state.
    pub fn all_symptoms_negative(&self, record: &PatientRecord) -> bool {
        self.symptoms.iter().all(|s| record.get(s.var) == 0)
    }

    pub fn present_conditions(&self, record: &PatientRecord) -> Vec<String> {
        self.conditions.iter().filter(|c| record.get(c.var) == c.on).map(|c| c.name.clone()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Normal,
    SpecialWithConditions,
    SpecialGeneric,
}

impl Route {
    pub fn is_special(self) -> bool {
        self != Route::Normal
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mention {
    Positive,
    Negative,
    Omit,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymptomMention {
    pub symptom: String,
    pub state: String,
    pub mention: Mention,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descriptor: Option<String>,
}

/// Every random choice behind one record's prompt. `symptoms` is in prompt
/// order and `conditions` lists the present underlying conditions in prompt
/// order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPlan {
    pub record_id: u64,
    pub route: Route,
    pub symptoms: Vec<SymptomMention>,
    pub conditions: Vec<String>,
    pub rng_seed: u64,
}

impl PromptPlan {
    pub fn symptom(&self, name: &str) -> Option<&SymptomMention> {
        self.symptoms.iter().find(|s| s.symptom == name)
    }
}

/// Seed of the plan for `record_id` within a corpus generated with `seed`.
pub fn plan_seed(seed: u64, record_id: u64) -> u64 {
    record_rng(seed ^ PLAN_SALT, record_id).next_u64()
}

/// Picks a descriptor for a present, mentioned symptom. Pneumonia wins over
/// the common cold, which wins over everything else; remaining active causes
/// share one pooled bag of phrases.
pub fn select_descriptor<R: Rng + ?Sized>(
    ctx: &NoteContext,
    symptom: &str,
    record: &PatientRecord,
    bank: &DescriptorBank,
    rng: &mut R,
) -> Option<String> {
    let active = ctx.active_causes(symptom, record);
    for dominant in DOMINANT_CAUSES {
        if active.iter().any(|c| c == dominant) {
            let list = bank.phrases(symptom, dominant);
            if !list.is_empty() {
                return list.choose(rng).cloned();
            }
        }
    }
    let pool: Vec<&String> = active.iter().flat_map(|c| bank.phrases(symptom, c)).collect();
    pool.choose(rng).map(|s| (*s).clone())
}

pub fn plan_prompt(
    ctx: &NoteContext,
    record: &PatientRecord,
    policy: &MentionPolicy,
    bank: &DescriptorBank,
    rng_seed: u64,
) -> PromptPlan {
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let mut symptoms: Vec<SymptomMention> = ctx
        .symptoms
        .iter()
        .map(|slot| {
            let value = record.get(slot.var);
            let state = ctx.state_label(slot.var, value).to_string();
            let mentioned = rng.gen::<f64>() < policy.rate(&slot.name, &state);
            let mention = match (mentioned, value != 0) {
                (false, _) => Mention::Omit,
                (true, true) => Mention::Positive,
                (true, false) => Mention::Negative,
            };
            SymptomMention { symptom: slot.name.clone(), state, mention, descriptor: None }
        })
        .collect();
    for s in symptoms.iter_mut().filter(|s| s.mention == Mention::Positive) {
        s.descriptor = select_descriptor(ctx, &s.symptom, record, bank, &mut rng);
    }
    symptoms.shuffle(&mut rng);
    let mut conditions = ctx.present_conditions(record);
    conditions.shuffle(&mut rng);
    let route = match (ctx.all_symptoms_negative(record), conditions.is_empty()) {
        (false, _) => Route::Normal,
        (true, false) => Route::SpecialWithConditions,
        (true, true) => Route::SpecialGeneric,
    };
    PromptPlan { record_id: record.id, route, symptoms, conditions, rng_seed }
}

/// Plans for a whole corpus, one independent seed per record id.
pub fn plan_corpus(
    ctx: &NoteContext,
    records: &[PatientRecord],
    policy: &MentionPolicy,
    bank: &DescriptorBank,
    seed: u64,
    exec: Execution,
) -> Vec<PromptPlan> {
    exec.map(records.len(), |i| {
        let r = &records[i];
        plan_prompt(ctx, r, policy, bank, plan_seed(seed, r.id))
    })
}

/// Prompt and offline-note wording. Each field is a plain-text template with
/// `{name}` placeholders; a line holding only a placeholder that renders
/// empty is dropped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Templates {
    pub normal: String,
    pub special_conditions: String,
    pub special_generic: String,
    pub compact: String,
    pub offline_note: String,
}

impl Default for Templates {
    fn default() -> Self {
        Templates {
            normal: include_str!("../templates/normal.txt").to_string(),
            special_conditions: include_str!("../templates/special_conditions.txt").to_string(),
            special_generic: include_str!("../templates/special_generic.txt").to_string(),
            compact: include_str!("../templates/compact.txt").to_string(),
            offline_note: include_str!("../templates/offline_note.txt").to_string(),
        }
    }
}

impl Templates {
    /// Bundled templates, with any of `normal.txt`, `special_conditions.txt`,
    /// `special_generic.txt`, `compact.txt` or `offline_note.txt` found in
    /// `dir` taking their place.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, NoteError> {
        let dir = dir.as_ref();
        let mut t = Templates::default();
        for (file, slot) in [
            ("normal.txt", &mut t.normal),
            ("special_conditions.txt", &mut t.special_conditions),
            ("special_generic.txt", &mut t.special_generic),
            ("compact.txt", &mut t.compact),
            ("offline_note.txt", &mut t.offline_note),
        ] {
            let path = dir.join(file);
            if path.exists() {
                *slot = std::fs::read_to_string(path)?;
            }
        }
        Ok(t)
    }
}

fn fill(template: &str, vars: &[(&str, String)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    for line in template.lines() {
        let trimmed = line.trim();
        let lone = vars.iter().find(|(k, _)| trimmed.len() == k.len() + 2 && trimmed[1..trimmed.len() - 1] == **k);
        if trimmed.starts_with('{') && trimmed.ends_with('}') {
            if let Some((_, v)) = lone {
                if v.is_empty() {
                    continue;
                }
            }
        }
        let mut l = line.to_string();
        for (k, v) in vars {
            l = l.replace(&format!("{{{k}}}"), v);
        }
        out.push_str(&l);
        out.push('\n');
    }
    out
}

fn display(symptom: &str) -> &str {
    match symptom {
        "pain" => "respiratory pain",
        "nasal" => "nasal symptoms",
        other => other,
    }
}

fn condition_display(condition: &str) -> &str {
    match condition {
        "hay_fever" => "hay fever",
        other => other,
    }
}

fn positive_phrase(s: &SymptomMention) -> String {
    if s.symptom == "fever" {
        format!("{} fever", s.state)
    } else {
        display(&s.symptom).to_string()
    }
}

fn join_list(items: &[String]) -> String {
    match items.len() {
        0 => String::new(),
        1 => items[0].clone(),
        n => format!("{} and {}", items[..n - 1].join(", "), items[n - 1]),
    }
}

fn check_plan(ctx: &NoteContext, plan: &PromptPlan, record: &PatientRecord) -> Result<(), NoteError> {
    let mismatch = |reason: String| Err(NoteError::PlanMismatch { record: record.id, reason });
    if plan.record_id != record.id {
        return mismatch(format!("plan is for record {}", plan.record_id));
    }
    for s in &plan.symptoms {
        let Some(slot) = ctx.slot(&s.symptom) else {
            return mismatch(format!("unknown symptom `{}`", s.symptom));
        };
        let actual = ctx.state_label(slot.var, record.get(slot.var));
        if actual != s.state {
            return mismatch(format!("{} is `{actual}`, plan says `{}`", s.symptom, s.state));
        }
    }
    if plan.symptoms.len() != ctx.symptoms.len() {
        return mismatch("plan does not cover every symptom".into());
    }
    let special = ctx.all_symptoms_negative(record);
    if special != plan.route.is_special() {
        return mismatch(format!("route {:?} does not fit the symptoms", plan.route));
    }
    Ok(())
}

fn conditions_sentence(plan: &PromptPlan) -> String {
    if plan.conditions.is_empty() {
        return String::new();
    }
    let names: Vec<String> = plan.conditions.iter().map(|c| condition_display(c).to_string()).collect();
    format!(
        "The patient has the following underlying health conditions, which may or may not be mentioned in the note: {}.",
        names.join(", ")
    )
}

/// The user prompt for a planned record.
pub fn render_prompt(
    ctx: &NoteContext,
    plan: &PromptPlan,
    record: &PatientRecord,
    templates: &Templates,
) -> Result<String, NoteError> {
    check_plan(ctx, plan, record)?;
    let text = match plan.route {
        Route::SpecialGeneric => fill(&templates.special_generic, &[("delimiter", GENERIC_DELIMITER.to_string())]),
        Route::SpecialWithConditions => {
            fill(&templates.special_conditions, &[("conditions", conditions_sentence(plan))])
        }
        Route::Normal => {
            let mut lines = Vec::new();
            let mut avoid = Vec::new();
            for s in &plan.symptoms {
                match s.mention {
                    Mention::Positive => lines.push(match &s.descriptor {
                        Some(d) => format!("- {} ({d})", positive_phrase(s)),
                        None => format!("- {}", positive_phrase(s)),
                    }),
                    Mention::Negative => lines.push(format!("- no {}", display(&s.symptom))),
                    Mention::Omit => avoid.push(display(&s.symptom).to_string()),
                }
            }
            if lines.is_empty() {
                lines.push("- (no specific symptoms to report)".into());
            }
            let avoid = if avoid.is_empty() {
                String::new()
            } else {
                format!("Do not mention anything about the following symptoms: {}.", avoid.join(", "))
            };
            fill(
                &templates.normal,
                &[("symptoms", lines.join("\n")), ("avoid", avoid), ("conditions", conditions_sentence(plan))],
            )
        }
    };
    Ok(text)
}

/// Wraps a finished note in the compact-rewrite instruction.
pub fn render_compact_prompt(note: &str, templates: &Templates) -> Result<String, NoteError> {
    if note.trim().is_empty() {
        return Err(NoteError::EmptyNote);
    }
    Ok(templates.compact.replace("{note}", note.trim_end()))
}

/// Splits a generic special-case completion into its notes.
pub fn split_generic(completion: &str) -> Vec<String> {
    let mut notes = vec![String::new()];
    for line in completion.lines() {
        if line.trim() == GENERIC_DELIMITER {
            notes.push(String::new());
        } else {
            let cur = notes.last_mut().expect("never empty");
            cur.push_str(line);
            cur.push('\n');
        }
    }
    notes.into_iter().map(|n| n.trim().to_string()).filter(|n| !n.is_empty()).collect()
}

const ONSETS: [&str; 6] =
    ["yesterday", "two days ago", "three days ago", "about a week ago", "last weekend", "this morning"];

/// Non-respiratory reasons for a visit: history line and examination line.
const OTHER_COMPLAINTS: [(&str, &str); 8] = [
    (
        "Comes in with a lower back ache after lifting heavy boxes {onset}.",
        "Paravertebral muscles tense on the left, straight leg raise negative.",
    ),
    (
        "Noticed an itchy skin rash on both forearms {onset}.",
        "Red, slightly raised patches on both forearms, no blisters.",
    ),
    (
        "Reports stomach issues with nausea and loose stools since {onset}.",
        "Abdomen soft, bowel sounds present, no guarding.",
    ),
    ("Twisted the right ankle while running {onset}.", "Swelling over the lateral malleolus, able to bear weight."),
    (
        "Has trouble sleeping and feels tired during the day, started {onset}.",
        "No abnormalities on general examination.",
    ),
    (
        "Asks for a check of a mole on the back that seemed to change {onset}.",
        "Regular, evenly colored mole of 4 mm, no signs of malignancy.",
    ),
    (
        "Reports a stiff neck after working long hours at a laptop since {onset}.",
        "Reduced rotation of the neck, tense trapezius muscles.",
    ),
    (
        "Comes for a prescription renewal and a short general check-up.",
        "Blood pressure and weight within the usual range.",
    ),
];

/// Template-based stand-in for the language model. States every
/// mention-positive symptom with its descriptor, denies every
/// mention-negative one, lists present conditions and names nothing else.
pub fn render_offline_note<R: Rng + ?Sized>(
    ctx: &NoteContext,
    plan: &PromptPlan,
    record: &PatientRecord,
    templates: &Templates,
    rng: &mut R,
) -> Result<String, NoteError> {
    check_plan(ctx, plan, record)?;
    let onset = *ONSETS.choose(rng).expect("nonempty");
    let mut history = Vec::new();
    let mut exam = Vec::new();
    let conditions: Vec<String> = plan.conditions.iter().map(|c| condition_display(c).to_string()).collect();
    match plan.route {
        Route::SpecialGeneric | Route::SpecialWithConditions => {
            let (h, e) = OTHER_COMPLAINTS.choose(rng).expect("nonempty");
            history.push(h.replace("{onset}", onset));
            if plan.route == Route::SpecialWithConditions {
                history.push(format!("Known with {}.", join_list(&conditions)));
            }
            exam.push(e.to_string());
        }
        Route::Normal => {
            let any_positive = plan.symptoms.iter().any(|s| s.mention == Mention::Positive);
            history.push(if any_positive {
                format!("Patient presents with complaints that started {onset}.")
            } else {
                "Patient visits the practice for a follow-up of recent complaints.".to_string()
            });
            for s in &plan.symptoms {
                match s.mention {
                    Mention::Positive => history.push(positive_sentence(s, rng)),
                    Mention::Negative => history.push(negative_sentence(&s.symptom, rng)),
                    Mention::Omit => {}
                }
            }
            if !conditions.is_empty() {
                let lead =
                    ["Known with", "Relevant history:", "Medical history includes"].choose(rng).expect("nonempty");
                history.push(format!("{lead} {}.", join_list(&conditions)));
            }
            exam.extend(exam_lines(plan, rng));
        }
    }
    Ok(fill(&templates.offline_note, &[("history", history.join(" ")), ("exam", exam.join(" "))]))
}

fn positive_sentence<R: Rng + ?Sized>(s: &SymptomMention, rng: &mut R) -> String {
    let detail = s.descriptor.as_ref().map(|d| {
        let style = rng.gen_range(0..2);
        if style == 0 {
            format!(", described as {d}")
        } else {
            format!(" ({d})")
        }
    });
    let detail = detail.unwrap_or_default();
    let leads: &[&str] = match s.symptom.as_str() {
        "dyspnea" => &["Reports dyspnea", "Complains of dyspnea", "Mentions dyspnea"],
        "cough" => &["Has a cough", "Reports a cough", "Complains of a cough"],
        "pain" => &["Reports respiratory pain", "Complains of respiratory pain"],
        "nasal" => &["Has nasal symptoms with a runny nose", "Reports nasal symptoms, sneezing and a blocked nose"],
        "fever" => {
            return match s.state.as_str() {
                "high" => ["Has had a high fever.", "Reports a high fever, measured at home."],
                _ => ["Reports a low fever.", "Mentions a low fever, slightly raised temperature at home."],
            }
            .choose(rng)
            .expect("nonempty")
            .to_string()
        }
        other => return format!("Reports {other}{detail}."),
    };
    format!("{}{detail}.", leads.choose(rng).expect("nonempty"))
}

fn negative_sentence<R: Rng + ?Sized>(symptom: &str, rng: &mut R) -> String {
    let name = display(symptom);
    let options = [format!("Denies {name}."), format!("No {name}.")];
    options.choose(rng).expect("nonempty").clone()
}

fn exam_lines<R: Rng + ?Sized>(plan: &PromptPlan, rng: &mut R) -> Vec<String> {
    let mut out = Vec::new();
    let general = ["Not acutely ill.", "Alert, somewhat tired.", "Good general condition."];
    out.push(general.choose(rng).expect("nonempty").to_string());
    if let Some(f) = plan.symptom("fever").filter(|f| f.mention != Mention::Omit) {
        let t = match f.state.as_str() {
            "high" => 39.0 + rng.gen_range(0..9) as f64 / 10.0,
            "low" => 37.6 + rng.gen_range(0..5) as f64 / 10.0,
            _ => 36.6 + rng.gen_range(0..5) as f64 / 10.0,
        };
        out.push(format!("Temperature {t:.1} °C."));
    }
    out.push(format!(
        "Heart rate {}/min, blood pressure {}/{} mmHg.",
        rng.gen_range(62..96),
        rng.gen_range(115..145),
        rng.gen_range(70..92)
    ));
    let positive = |name: &str| plan.symptom(name).is_some_and(|s| s.mention == Mention::Positive);
    if positive("dyspnea") {
        out.push(
            ["Expiratory wheezing on auscultation.", "Prolonged expiration, saturation 95%."]
                .choose(rng)
                .expect("nonempty")
                .to_string(),
        );
    } else {
        out.push("Lung auscultation without abnormalities.".to_string());
    }
    if positive("nasal") {
        out.push("Nasal mucosa swollen and red.".to_string());
    }
    out
}

const ABBREVIATIONS: [(&str, &str); 16] = [
    ("History:", "Hx:"),
    ("Physical examination:", "PE:"),
    ("Patient presents with", "Pt w/"),
    ("Patient ", "Pt "),
    ("patient", "pt"),
    ("complaints", "c/o"),
    ("Complains of", "c/o"),
    ("Temperature", "T"),
    ("Heart rate", "HR"),
    ("blood pressure", "BP"),
    ("dyspnea", "SOB"),
    ("respiratory", "resp."),
    (" without ", " w/o "),
    (" with ", " w/ "),
    ("auscultation", "ausc."),
    ("Known with", "PMH:"),
];

/// Offline stand-in for the compact rewrite: abbreviations and a single dense
/// paragraph per section.
pub fn render_offline_compact(note: &str) -> Result<String, NoteError> {
    if note.trim().is_empty() {
        return Err(NoteError::EmptyNote);
    }
    let mut text = note.to_string();
    for (long, short) in ABBREVIATIONS {
        text = text.replace(long, short);
    }
    let dense: Vec<String> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.replace(". ", "; ").trim_end_matches('.').to_string())
        .collect();
    Ok(dense.join("\n"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Llm,
    Offline,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
}

/// A record's prompt, note and compact note.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoteBundle {
    pub record_id: u64,
    pub route: Route,
    pub prompt: String,
    pub note: String,
    pub compact_prompt: String,
    pub compact_note: String,
    pub generator: Generator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
}

/// Generator for the offline note of a plan; independent of the plan's own
/// draws.
pub fn offline_rng(plan: &PromptPlan) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(plan.rng_seed);
    rng.set_stream(1);
    rng
}
