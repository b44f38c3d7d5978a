pub mod adapter;
pub mod compile;
pub mod corpus;
pub mod exec;
pub mod jsonl;
pub mod llm;
pub mod patch;
pub mod pipeline;
pub mod report;
pub mod sanitizer;
pub mod suite;
