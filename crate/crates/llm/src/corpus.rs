use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use synsum_core::notegen::{
    offline_rng, render_compact_prompt, render_offline_compact, render_offline_note, render_prompt, split_generic,
    Generator, NoteBundle, NoteContext, PromptPlan, Route, Templates, Usage, GENERIC_BATCH,
};
use synsum_core::PatientRecord;

use crate::cache::{cache_key, Cache};
use crate::client::{ChatClient, Completer};
use crate::config::{GenConfig, Mode};
use crate::LlmError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordError {
    pub record_id: u64,
    pub error: String,
}

/// Bundles and failures, each in record order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusOutput {
    pub bundles: Vec<NoteBundle>,
    pub errors: Vec<RecordError>,
    /// Records served from the cache instead of being generated.
    pub cached: usize,
}

enum Unit {
    Single(usize),
    Generic(Vec<usize>),
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn add_usage(a: &mut Usage, b: &Usage) {
    a.prompt_tokens += b.prompt_tokens;
    a.completion_tokens += b.completion_tokens;
    a.latency_ms += b.latency_ms;
}

struct Job<'a> {
    ctx: &'a NoteContext,
    plans: &'a [PromptPlan],
    records: &'a [PatientRecord],
    prompts: &'a [Option<String>],
    templates: &'a Templates,
    config: &'a GenConfig,
    completer: Option<&'a dyn Completer>,
}

impl Job<'_> {
    fn offline(&self, i: usize) -> Result<NoteBundle, LlmError> {
        let (plan, record) = (&self.plans[i], &self.records[i]);
        let prompt = self.prompts[i].clone().expect("rendered");
        let note = render_offline_note(self.ctx, plan, record, self.templates, &mut offline_rng(plan))?;
        Ok(NoteBundle {
            record_id: record.id,
            route: plan.route,
            prompt,
            compact_prompt: render_compact_prompt(&note, self.templates)?,
            compact_note: render_offline_compact(&note)?,
            note,
            generator: Generator::Offline,
            model_id: None,
            timestamp: now(),
            usage: None,
        })
    }

    /// Compact rewrite of an existing note, completing the bundle.
    fn finish(&self, i: usize, note: String, mut usage: Usage) -> Result<NoteBundle, LlmError> {
        let completer = self.completer.expect("llm mode");
        let compact_prompt = render_compact_prompt(&note, self.templates)?;
        let compact = completer.complete(&compact_prompt)?;
        add_usage(&mut usage, &compact.usage);
        Ok(NoteBundle {
            record_id: self.records[i].id,
            route: self.plans[i].route,
            prompt: self.prompts[i].clone().expect("rendered"),
            note,
            compact_prompt,
            compact_note: compact.text,
            generator: Generator::Llm,
            model_id: Some(self.config.model.clone()),
            timestamp: now(),
            usage: Some(usage),
        })
    }

    fn run(&self, unit: &Unit) -> Vec<(usize, Result<NoteBundle, LlmError>)> {
        match unit {
            Unit::Single(i) if self.config.mode == Mode::Offline => vec![(*i, self.offline(*i))],
            Unit::Single(i) => {
                let r = self
                    .completer
                    .expect("llm mode")
                    .complete(self.prompts[*i].as_deref().expect("rendered"))
                    .and_then(|c| self.finish(*i, c.text, c.usage));
                vec![(*i, r)]
            }
            Unit::Generic(members) => {
                let prompt = self.prompts[members[0]].as_deref().expect("rendered");
                let completion = match self.completer.expect("llm mode").complete(prompt) {
                    Ok(c) => c,
                    Err(e) => {
                        let msg = e.to_string();
                        return members
                            .iter()
                            .map(|&i| (i, Err(LlmError::Transport { attempts: 0, message: msg.clone() })))
                            .collect();
                    }
                };
                let mut notes = split_generic(&completion.text);
                let first = self.records[members[0]].id;
                notes.shuffle(&mut ChaCha8Rng::seed_from_u64(self.config.seed ^ first));
                let share = Usage {
                    prompt_tokens: completion.usage.prompt_tokens / members.len() as u64,
                    completion_tokens: completion.usage.completion_tokens / members.len() as u64,
                    latency_ms: completion.usage.latency_ms,
                };
                let got = notes.len();
                let mut notes = notes.into_iter();
                members
                    .iter()
                    .map(|&i| match notes.next() {
                        Some(n) => (i, self.finish(i, n, share.clone())),
                        None => (
                            i,
                            Err(LlmError::Response(format!(
                                "generic completion held {got} note(s) for {} records",
                                members.len()
                            ))),
                        ),
                    })
                    .collect()
            }
        }
    }
}

/// Generates every record's bundle. In llm mode the API key comes from the
/// environment variable named in the config.
pub fn generate_corpus(
    ctx: &NoteContext,
    plans: &[PromptPlan],
    records: &[PatientRecord],
    templates: &Templates,
    config: &GenConfig,
) -> Result<CorpusOutput, LlmError> {
    config.validate()?;
    match config.mode {
        Mode::Offline => generate_corpus_with(None, ctx, plans, records, templates, config),
        Mode::Llm => {
            let client = ChatClient::from_env(config.clone())?;
            generate_corpus_with(Some(&client), ctx, plans, records, templates, config)
        }
    }
}

/// Same as [`generate_corpus`] with a caller-supplied completer for llm mode.
pub fn generate_corpus_with(
    completer: Option<&dyn Completer>,
    ctx: &NoteContext,
    plans: &[PromptPlan],
    records: &[PatientRecord],
    templates: &Templates,
    config: &GenConfig,
) -> Result<CorpusOutput, LlmError> {
    config.validate()?;
    if plans.len() != records.len() {
        return Err(LlmError::Config(format!("{} plans for {} records", plans.len(), records.len())));
    }
    if let Some((p, r)) = plans.iter().zip(records).find(|(p, r)| p.record_id != r.id) {
        return Err(LlmError::Config(format!("plan for record {} is aligned with record {}", p.record_id, r.id)));
    }
    if config.mode == Mode::Llm && completer.is_none() {
        return Err(LlmError::Config("llm mode needs a completer".into()));
    }
    let cache = config.cache_dir.as_ref().map(Cache::open).transpose()?;
    let model = config.model_label();

    let n = records.len();
    let mut results: Vec<Option<Result<NoteBundle, LlmError>>> = (0..n).map(|_| None).collect();
    let mut prompts: Vec<Option<String>> = vec![None; n];
    let mut keys: Vec<String> = vec![String::new(); n];
    let mut cached = 0;
    for i in 0..n {
        match render_prompt(ctx, &plans[i], &records[i], templates) {
            Ok(p) => {
                keys[i] = cache_key(records[i].id, &p, &model, config.temperature);
                if let Some(hit) = cache.as_ref().and_then(|c| c.get(records[i].id, &keys[i])) {
                    results[i] = Some(Ok(hit));
                    cached += 1;
                }
                prompts[i] = Some(p);
            }
            Err(e) => results[i] = Some(Err(e.into())),
        }
    }

    let pending: Vec<usize> = (0..n).filter(|&i| results[i].is_none()).collect();
    let mut units: Vec<Unit> = Vec::new();
    let mut generic: Vec<usize> = Vec::new();
    for i in pending {
        if config.mode == Mode::Llm && plans[i].route == Route::SpecialGeneric {
            generic.push(i);
        } else {
            units.push(Unit::Single(i));
        }
    }
    units.extend(generic.chunks(GENERIC_BATCH).map(|c| Unit::Generic(c.to_vec())));

    let job = Job { ctx, plans, records, prompts: &prompts, templates, config, completer };
    let next = AtomicUsize::new(0);
    let done: Mutex<Vec<(usize, Result<NoteBundle, LlmError>)>> = Mutex::new(Vec::new());
    let workers = config.concurrency.min(units.len()).max(1);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let u = next.fetch_add(1, Ordering::Relaxed);
                let Some(unit) = units.get(u) else { break };
                let out = job.run(unit);
                if let Some(cache) = &cache {
                    for (i, r) in &out {
                        if let Ok(b) = r {
                            // A failed cache write only costs a regeneration later.
                            let _ = cache.put(&keys[*i], b);
                        }
                    }
                }
                done.lock().unwrap_or_else(|e| e.into_inner()).extend(out);
            });
        }
    });
    for (i, r) in done.into_inner().unwrap_or_else(|e| e.into_inner()) {
        results[i] = Some(r);
    }

    let mut output = CorpusOutput { cached, ..CorpusOutput::default() };
    for (i, r) in results.into_iter().enumerate() {
        match r.expect("every record handled") {
            Ok(b) => output.bundles.push(b),
            Err(e) => output.errors.push(RecordError { record_id: records[i].id, error: e.to_string() }),
        }
    }
    Ok(output)
}
