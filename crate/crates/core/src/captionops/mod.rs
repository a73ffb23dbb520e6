//! Caption-side interventions: n-gram quality filtering, descriptiveness
//! scoring and paraphrasing.

mod descriptiveness;
mod filter;
mod hashing;
mod paraphrase;
mod remote;

pub use descriptiveness::{oracle_descriptiveness, DescriptivenessScore};
pub use filter::{filter_dataset, train_filter, FilterConfig, FilterTraining, NGramFilterModel, FILTER_VERSION};
pub use hashing::{hash_ngrams, ngram_bucket, SparseCounts, DEFAULT_BUCKETS};
pub use paraphrase::{paraphrase, paraphrase_dataset};
pub use remote::{
    default_context_pairs, remote_paraphrase, CompletionBackend, CompletionRequest, CompletionResponse, ContextPair,
    HttpEndpoint, ParaphraseRequest, PROMPT_INSTRUCTION, TOKEN_ENV, URL_ENV,
};
