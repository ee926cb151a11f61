//! Endpoint handlers.

use std::path::Path;
use std::sync::Arc;

use axum::extract::State;
use axum::{Json, Router};

use thoughtrag_api as api;
use thoughtrag_core::bm25::{retrieve_top_k, Searcher};
use thoughtrag_core::dpo::{self, DpoConfig};
use thoughtrag_core::eval::{self, EvalOptions, PhaseSampling, StrategySpec};
use thoughtrag_core::mcqa::{load_mcqa_dataset, McqaItem};
use thoughtrag_core::pipeline::{self, AnswerRecord, ThoughtSample};
use thoughtrag_core::prefs::{self, PrefsConfig};
use thoughtrag_core::scaling::{self, ScalingConfig, ScalingStrategy};
use thoughtrag_core::seed;

use crate::error::ApiError;
use crate::state::AppState;

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    use axum::routing::{get, post};
    Router::new()
        .route(api::paths::HEALTH, get(health))
        .route(api::paths::INDEX_BUILD, post(index_build))
        .route(api::paths::INDEX_LOAD, post(index_load))
        .route(api::paths::INDEX_LIST, get(index_list))
        .route(api::paths::RETRIEVE, post(retrieve))
        .route(api::paths::ASK, post(ask))
        .route(api::paths::PREFS_BUILD, post(prefs_build))
        .route(api::paths::DPO_CHECK, post(dpo_check))
        .route(api::paths::EVAL, post(eval_run))
        .with_state(state)
}

async fn health() -> Json<api::HealthResponse> {
    Json(api::HealthResponse {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn index_build(
    State(state): State<Shared>,
    Json(request): Json<api::BuildIndexRequest>,
) -> Result<Json<api::BuildIndexResponse>, ApiError> {
    if let Some(params) = &request.params {
        params.validate()?;
    }
    let entry = state.build_from_corpus(&request.corpus_path).await?;
    let saved_to = match &request.save_path {
        Some(path) => {
            state.save_index_to(&entry, path)?;
            Some(path.clone())
        }
        None => None,
    };
    Ok(Json(api::BuildIndexResponse {
        index: entry.info.clone(),
        saved_to,
    }))
}

async fn index_load(
    State(state): State<Shared>,
    Json(request): Json<api::LoadIndexRequest>,
) -> Result<Json<api::BuildIndexResponse>, ApiError> {
    let entry = state.load_from_index_file(&request.path).await?;
    Ok(Json(api::BuildIndexResponse {
        index: entry.info.clone(),
        saved_to: None,
    }))
}

async fn index_list(State(state): State<Shared>) -> Json<api::ListIndexesResponse> {
    Json(api::ListIndexesResponse {
        indexes: state.list_indexes().await,
    })
}

async fn retrieve(
    State(state): State<Shared>,
    Json(request): Json<api::RetrieveRequest>,
) -> Result<Json<api::RetrieveResponse>, ApiError> {
    let entry = state.resolve(&request.index).await?;
    let params = state.params_with_top_k(request.top_k);
    // Bare retrieval needs no corpus, so query the index directly.
    let result = retrieve_top_k(&entry.index, &request.query, &params);
    Ok(Json(api::RetrieveResponse { result }))
}

fn phases_for(state: &AppState, overrides: Option<PhaseSampling>) -> PhaseSampling {
    overrides.unwrap_or(state.config.sampling)
}

async fn run_single(
    state: &AppState,
    searcher: &Searcher,
    item: &McqaItem,
    strategy: StrategySpec,
    phases: &PhaseSampling,
) -> Result<(AnswerRecord, Option<ThoughtSample>), ApiError> {
    let generator = state.generator.as_ref();
    let templates = &state.config.templates;
    match strategy {
        StrategySpec::QuestionRag => {
            let record =
                pipeline::question_rag(generator, searcher, item, &phases.answer, templates)
                    .await?;
            Ok((record, None))
        }
        StrategySpec::ThoughtRag => {
            let thought =
                pipeline::sample_thought(generator, item, &phases.thought, 0, templates).await?;
            let record = pipeline::thought_rag(
                generator, searcher, item, &thought, &phases.answer, templates,
            )
            .await?;
            Ok((record, Some(thought)))
        }
        StrategySpec::Parallel { m } => {
            let config = ScalingConfig {
                m,
                strategy: ScalingStrategy::Parallel,
                sampling: phases.scaling,
                accumulate_context: false,
            };
            let record = scaling::parallel_scale(
                generator, searcher, item, &config, &phases.answer, templates,
            )
            .await?;
            Ok((record, None))
        }
        StrategySpec::Iterative { m } => {
            let config = ScalingConfig {
                m,
                strategy: ScalingStrategy::Iterative,
                sampling: phases.scaling,
                accumulate_context: false,
            };
            let record = scaling::iterative_scale(
                generator, searcher, item, &config, &phases.answer, templates,
            )
            .await?;
            Ok((record, None))
        }
    }
}

async fn ask(
    State(state): State<Shared>,
    Json(request): Json<api::AskRequest>,
) -> Result<Json<api::AskResponse>, ApiError> {
    let item = match (&request.item, &request.question) {
        (Some(item), None) => item.clone(),
        (None, Some(question)) => McqaItem::adhoc(question.clone()),
        _ => {
            return Err(ApiError::bad_request(
                "bad_request",
                "provide exactly one of `item` and `question`",
            ))
        }
    };
    let entry = state.resolve(&request.index).await?;
    let searcher = entry.searcher(state.params_with_top_k(request.top_k))?;
    let phases = phases_for(&state, request.sampling);
    let (record, thought) = run_single(&state, &searcher, &item, request.strategy, &phases).await?;
    Ok(Json(api::AskResponse { record, thought }))
}

async fn prefs_build(
    State(state): State<Shared>,
    Json(request): Json<api::BuildPrefsRequest>,
) -> Result<Json<api::BuildPrefsResponse>, ApiError> {
    let entry = state.resolve(&request.index).await?;
    let searcher = entry.searcher(state.config.bm25)?;
    let items = load_mcqa_dataset(&request.dataset_path)?;

    let defaults = &state.config;
    let root_seed = request.seed.unwrap_or(defaults.seed);
    let mut sampling = request.sampling.unwrap_or(defaults.sampling.thought);
    sampling.seed = Some(seed::derive(root_seed, "prefs-sampling"));
    let config = PrefsConfig {
        n_thoughts: request.n_thoughts.unwrap_or(defaults.prefs.n_thoughts),
        n_answers: request.n_answers.unwrap_or(defaults.prefs.n_answers),
        answer_pairs_per_item: request
            .answer_pairs_per_item
            .unwrap_or(defaults.prefs.answer_pairs_per_item),
        sampling,
        seed: root_seed,
    };
    let concurrency = request.concurrency.unwrap_or(defaults.workers);

    let (dataset, summary) = prefs::build_dataset(
        state.generator.as_ref(),
        &searcher,
        &items,
        &config,
        &defaults.templates,
        concurrency,
    )
    .await?;

    let exported_to = match &request.export_path {
        Some(path) => {
            prefs::export_dataset(&dataset.pairs, path)?;
            Some(path.clone())
        }
        None => None,
    };

    Ok(Json(api::BuildPrefsResponse {
        pairs: dataset.pairs,
        summary,
        seed: dataset.seed,
        exported_to,
    }))
}

async fn dpo_check(
    State(state): State<Shared>,
    Json(request): Json<api::DpoCheckRequest>,
) -> Result<Json<api::DpoCheckResponse>, ApiError> {
    let records = match (request.records, &request.path) {
        (Some(records), None) => records,
        (None, Some(path)) => dpo::load_logprob_records(path)?,
        _ => {
            return Err(ApiError::bad_request(
                "bad_request",
                "provide exactly one of `records` and `path`",
            ))
        }
    };
    let config = DpoConfig {
        beta: request.beta.unwrap_or(state.config.dpo.beta),
    };
    let report = dpo::dpo_check(&records, &config, request.length_normalize)?;
    Ok(Json(api::DpoCheckResponse { report }))
}

fn dataset_name_of(path: &Path, explicit: Option<String>) -> String {
    explicit.unwrap_or_else(|| {
        path.file_stem()
            .map(|stem| stem.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string())
    })
}

async fn eval_run(
    State(state): State<Shared>,
    Json(request): Json<api::EvalRequest>,
) -> Result<Json<api::EvalResponse>, ApiError> {
    let entry = state.resolve(&request.index).await?;
    let searcher = entry.searcher(state.params_with_top_k(request.top_k))?;
    let items = load_mcqa_dataset(&request.dataset_path)?;
    let dataset_name = dataset_name_of(&request.dataset_path, request.dataset_name.clone());

    let mut phases = phases_for(&state, request.sampling);
    if let Some(root) = request.seed {
        phases.thought.seed = Some(seed::derive(root, "eval-thought"));
        phases.answer.seed = Some(seed::derive(root, "eval-answer"));
        phases.scaling.seed = Some(seed::derive(root, "eval-scaling"));
    }

    let snapshot = serde_json::json!({
        "config": state.config.snapshot(),
        "request": serde_json::to_value(&request).expect("request serializes"),
    });
    let options = EvalOptions {
        dataset_name: &dataset_name,
        strict: request.strict.unwrap_or(state.config.strict),
        concurrency: request.concurrency.unwrap_or(state.config.workers),
        config_snapshot: &snapshot,
    };
    let generator = state.generator.as_ref();
    let templates = &state.config.templates;

    let response = match &request.mode {
        api::EvalMode::Single { strategy } => {
            let report = eval::evaluate(
                generator, &searcher, &items, *strategy, &phases, templates, &options,
            )
            .await?;
            api::EvalResponse {
                reports: vec![report],
                deltas: None,
                table: None,
            }
        }
        api::EvalMode::Compare { strategies } => {
            let comparison = eval::compare_strategies(
                generator, &searcher, &items, strategies, &phases, templates, &options,
            )
            .await?;
            api::EvalResponse {
                reports: comparison.reports,
                deltas: Some(comparison.deltas),
                table: None,
            }
        }
        api::EvalMode::SweepTopK { strategy, k_values } => {
            let table = eval::sweep_top_k(
                generator, &searcher, &items, *strategy, k_values, &phases, templates, &options,
            )
            .await?;
            api::EvalResponse {
                reports: Vec::new(),
                deltas: None,
                table: Some(table),
            }
        }
        api::EvalMode::SweepScaling { strategy, m_values } => {
            let table = eval::sweep_scaling(
                generator, &searcher, &items, *strategy, m_values, &phases, templates, &options,
            )
            .await?;
            api::EvalResponse {
                reports: Vec::new(),
                deltas: None,
                table: Some(table),
            }
        }
    };
    Ok(Json(response))
}
