//! Ask a model which project a function comes from. The backend here is a
//! small in-process stand-in that knows a couple of functions, which also
//! shows how to plug a custom backend into the gateway.
//!
//!     cargo run --example contamination_probe

use std::path::Path;

use funcbench::corpus::{extract_functions, ExtractionConfig};
use funcbench::llm::{contamination_probe, BackendError, ModelBackend, PromptRequest, PromptTemplate};

struct Forgetful;

impl ModelBackend for Forgetful {
    fn is_live(&self) -> bool {
        false
    }

    fn complete(&self, request: &PromptRequest) -> Result<String, BackendError> {
        Ok(if request.user_text.contains("mk_vec") {
            "This is the vector helper from the Mock_Project test fixture.".into()
        } else {
            "Looks like generic C utility code; I can't tell which project.".into()
        })
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mock_project");
    let corpus =
        extract_functions(&root, &ExtractionConfig { exclude: vec!["tests/**".into()], ..Default::default() })?;
    let template = PromptTemplate::contamination();
    println!("--- probe prompt ---\n{}\n", template.system);
    let mut hits = 0;
    for r in &corpus.records {
        let p = contamination_probe(r, &Forgetful, &template, "local/forgetful", "mock_project")?;
        hits += p.recognized as usize;
        println!("  {:<22} {}", r.name, if p.recognized { "recognized" } else { "-" });
    }
    println!("{hits}/{} recognized", corpus.records.len());
    Ok(())
}
