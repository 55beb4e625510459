use rtlsmith_core::ExtractionDoc;
use rtlsmith_llm::ChatBackend;

use crate::roles::EXTRACTOR;
use crate::{ask, AgentConfig, AgentError, AgentLog, AgentOutcome, AgentTrace};

/// One extraction reply, validated; a second chance if it does not parse.
pub fn run_extraction(
    spec: &str,
    backend: &dyn ChatBackend,
    config: &AgentConfig,
    log: &dyn AgentLog,
) -> Result<AgentOutcome, AgentError> {
    let system = &config.prompts.extractor;
    let mut trace = AgentTrace::default();
    let mut query = format!("Module specification:\n{spec}\n\nReturn the extraction JSON object.");
    let mut error = String::new();
    for round in 1..=2 {
        let reply = ask(backend, log, EXTRACTOR, system, query)?;
        trace.say(EXTRACTOR, &reply);
        match ExtractionDoc::from_json(&reply) {
            Ok(doc) => {
                let artifact = serde_json::to_string_pretty(&doc).expect("doc serializes");
                return Ok(AgentOutcome {
                    agent: EXTRACTOR.into(),
                    ok: true,
                    artifact,
                    trace,
                    rounds: round,
                    notes: Vec::new(),
                }
                .logged(log));
            }
            Err(e) => error = e.to_string(),
        }
        query = format!(
            "Your previous reply could not be used: {error}\nReturn only the JSON object.\n\nModule specification:\n{spec}"
        );
    }
    AgentOutcome {
        agent: EXTRACTOR.into(),
        ok: false,
        artifact: String::new(),
        trace,
        rounds: 2,
        notes: vec![error.clone()],
    }
    .logged(log);
    Err(AgentError::ExtractionInvalid(error))
}
