//! Subcommand implementations: build API requests, call the service, and
//! write the result files.

use std::path::PathBuf;

use thoughtrag_api as api;
use thoughtrag_client::Client;
use thoughtrag_core::config::RunConfig;
use thoughtrag_core::eval::{StrategyDelta, StrategySpec};
use thoughtrag_core::mcqa::load_mcqa_dataset;
use thoughtrag_core::prefs::export_dataset;

use crate::args::{Cli, Command, IndexArg};
use crate::output::{file_token, stem_of, OutputDir};
use crate::CliError;

fn index_source(arg: &IndexArg) -> Result<api::IndexSource, CliError> {
    match (&arg.corpus, &arg.index) {
        (Some(path), None) => Ok(api::IndexSource::Corpus { path: path.clone() }),
        (None, Some(path)) => Ok(api::IndexSource::IndexFile { path: path.clone() }),
        _ => Err(CliError::new("usage", "provide exactly one of --corpus and --index")),
    }
}

fn parse_strategy(raw: &str, config: &RunConfig, scale_m: Option<usize>) -> Result<StrategySpec, CliError> {
    let mut spec: StrategySpec = raw
        .parse()
        .map_err(|e: String| CliError::new("usage", e))?;
    // --scale-m overrides the budget of scaled strategies given without
    // an inline :m.
    let m_override = scale_m.unwrap_or(config.scaling.m);
    if !raw.contains(':') {
        spec = match spec {
            StrategySpec::Parallel { .. } => StrategySpec::Parallel { m: m_override },
            StrategySpec::Iterative { .. } => StrategySpec::Iterative { m: m_override },
            other => other,
        };
    }
    Ok(spec)
}

pub async fn dispatch(cli: &Cli, config: &RunConfig, client: &Client) -> Result<(), CliError> {
    let out = OutputDir::prepare(config)?;
    out.write_snapshot(config, &cli.command)?;

    match &cli.command {
        Command::Serve { .. } => unreachable!("handled before dispatch"),

        Command::Index { corpus, out: index_out } => {
            let response = client
                .build_index(&api::BuildIndexRequest {
                    corpus_path: corpus.clone(),
                    params: Some(config.bm25),
                    save_path: Some(index_out.clone()),
                })
                .await?;
            out.write_json("index_info.json", &response)?;
            let info = &response.index;
            println!(
                "indexed {} chunks, {} terms, avg length {:.3}",
                info.n_docs, info.n_terms, info.avg_doc_len
            );
            if let Some(path) = &response.saved_to {
                println!("saved to {}", path.display());
            }
        }

        Command::Retrieve { index, query, k } => {
            let response = client
                .retrieve(&api::RetrieveRequest {
                    index: index_source(index)?,
                    query: query.clone(),
                    top_k: k.or(Some(config.bm25.top_k)),
                })
                .await?;
            out.write_json("retrieval.json", &response.result)?;
            println!("query tokens: {}", response.result.query_tokens.join());
            if response.result.hits.is_empty() {
                println!("no hits");
            }
            for (rank, hit) in response.result.hits.iter().enumerate() {
                println!("{:>3}. {}  score={:.6}", rank + 1, hit.id, hit.score);
            }
        }

        Command::Ask {
            index,
            question,
            item_file,
            qid,
            strategy,
        } => {
            let strategy = parse_strategy(strategy, config, cli.scale_m)?;
            let item = match (question, item_file) {
                (Some(_), None) => None,
                (None, Some(path)) => {
                    let items = load_mcqa_dataset(path)
                        .map_err(|e| CliError::new("dataset", e.to_string()))?;
                    let item = match qid {
                        Some(qid) => items
                            .into_iter()
                            .find(|item| item.qid() == qid)
                            .ok_or_else(|| {
                                CliError::new("dataset", format!("no item with qid {qid:?}"))
                            })?,
                        None => items.into_iter().next().expect("loader rejects empty files"),
                    };
                    Some(item)
                }
                _ => {
                    return Err(CliError::new(
                        "usage",
                        "provide exactly one of --question and --item-file",
                    ))
                }
            };
            let response = client
                .ask(&api::AskRequest {
                    index: index_source(index)?,
                    item,
                    question: question.clone(),
                    strategy,
                    sampling: Some(config.sampling),
                    top_k: Some(config.bm25.top_k),
                })
                .await?;
            out.write_json("answer.json", &response)?;
            let record = &response.record;
            println!("strategy: {}", record.strategy);
            println!("context chunks: {}", record.context_chunk_ids.join(", "));
            match record.extracted_label {
                Some(label) => println!("extracted answer: {label}"),
                None => println!("extracted answer: (none)"),
            }
            println!("---\n{}", record.raw_text);
        }

        Command::BuildPrefs {
            index,
            dataset,
            n_thoughts,
            n_answers,
            pairs_per_item,
            export,
        } => {
            let response = client
                .build_prefs(&api::BuildPrefsRequest {
                    index: index_source(index)?,
                    dataset_path: dataset.clone(),
                    n_thoughts: n_thoughts.or(Some(config.prefs.n_thoughts)),
                    n_answers: n_answers.or(Some(config.prefs.n_answers)),
                    answer_pairs_per_item: pairs_per_item
                        .or(Some(config.prefs.answer_pairs_per_item)),
                    sampling: Some(config.sampling.thought),
                    seed: Some(config.seed),
                    concurrency: Some(config.workers),
                    export_path: None,
                })
                .await?;

            // The export file is written client-side from the returned
            // pairs, so it lands next to the other outputs even when the
            // service runs remotely.
            let export_path: PathBuf = match export {
                Some(path) => path.clone(),
                None => out.path("preference_pairs.jsonl"),
            };
            export_dataset(&response.pairs, &export_path)
                .map_err(|e| CliError::new("prefs", e.to_string()))?;
            out.write_json("prefs_summary.json", &response.summary)?;

            let summary = &response.summary;
            println!(
                "built {} pairs ({} thought, {} answer) from {} items; seed {}",
                summary.thought_pairs + summary.answer_pairs,
                summary.thought_pairs,
                summary.answer_pairs,
                summary.items_processed,
                response.seed,
            );
            println!("exported to {}", export_path.display());
        }

        Command::DpoCheck {
            input,
            beta,
            length_normalize,
        } => {
            let response = client
                .dpo_check(&api::DpoCheckRequest {
                    records: None,
                    path: Some(input.clone()),
                    beta: beta.or(Some(config.dpo.beta)),
                    length_normalize: *length_normalize,
                })
                .await?;
            out.write_json("dpo_report.json", &response.report)?;
            let report = &response.report;
            println!(
                "pairs: {}  beta: {}  mean loss: {:.12}",
                report.n_pairs, report.beta, report.mean_loss
            );
            println!("mean margin: {:.12}", report.mean_margin);
            for (kind, stats) in &report.per_kind {
                println!("  {kind}: {} pairs, mean loss {:.12}", stats.n_pairs, stats.mean_loss);
            }
            println!(
                "grad d/d lp_pol_chosen: mean |g| {:.9}, min {:.9}, max {:.9}",
                report.grad_policy_chosen.mean_abs,
                report.grad_policy_chosen.min,
                report.grad_policy_chosen.max
            );
        }

        Command::Eval {
            index,
            dataset,
            dataset_name,
            strategy,
            compare,
            sweep_k,
            sweep_m,
            sweep_strategy,
        } => {
            let source = index_source(index)?;
            let mode = build_eval_mode(
                config,
                cli.scale_m,
                strategy.as_deref(),
                compare,
                sweep_k,
                sweep_m,
                sweep_strategy,
            )?;

            let mut accuracies: Vec<(String, f64)> = Vec::new();
            for dataset_path in dataset {
                let name = dataset_name
                    .clone()
                    .unwrap_or_else(|| stem_of(dataset_path));
                let response = client
                    .eval(&api::EvalRequest {
                        index: source.clone(),
                        dataset_path: dataset_path.clone(),
                        dataset_name: Some(name.clone()),
                        mode: mode.clone(),
                        sampling: Some(config.sampling),
                        top_k: Some(config.bm25.top_k),
                        strict: Some(config.strict),
                        concurrency: Some(config.workers),
                        seed: Some(config.seed),
                    })
                    .await?;

                // Flush per dataset so long multi-dataset runs keep what
                // they finished.
                for report in &response.reports {
                    let file = format!(
                        "eval_{}_{}.json",
                        file_token(&name),
                        file_token(&report.strategy)
                    );
                    out.write_json(&file, report)?;
                    println!(
                        "{name} {}: accuracy {:.4} ({}/{})",
                        report.strategy, report.accuracy, report.n_correct, report.n_items
                    );
                    accuracies.push((report.strategy.clone(), report.accuracy));
                }
                if let Some(deltas) = &response.deltas {
                    let file = format!("deltas_{}.tsv", file_token(&name));
                    out.write_text(&file, &delta_tsv(deltas))?;
                    for delta in deltas {
                        println!(
                            "{name} delta {} vs {}: {:+.4}",
                            delta.strategy_a, delta.strategy_b, delta.delta
                        );
                    }
                }
                if let Some(table) = &response.table {
                    let base = format!("sweep_{}_{}", file_token(&table.parameter), file_token(&name));
                    out.write_text(&format!("{base}.tsv"), &table.to_tsv())?;
                    out.write_text(
                        &format!("{base}.svg"),
                        &thoughtrag_core::eval::sweep_chart_svg(table),
                    )?;
                    for row in &table.rows {
                        println!(
                            "{name} {}={}: accuracy {:.4} ({}/{})",
                            table.parameter, row.value, row.accuracy, row.n_correct, row.n_items
                        );
                    }
                }
            }

            // Datasets weigh equally in the average, not items.
            if dataset.len() > 1 && !accuracies.is_empty() {
                let mean = accuracies.iter().map(|(_, a)| a).sum::<f64>() / accuracies.len() as f64;
                out.write_json(
                    "eval_average.json",
                    &serde_json::json!({
                        "n_datasets": dataset.len(),
                        "runs": accuracies
                            .iter()
                            .map(|(s, a)| serde_json::json!({"strategy": s, "accuracy": a}))
                            .collect::<Vec<_>>(),
                        "average_accuracy": mean,
                    }),
                )?;
                println!("average accuracy over {} runs: {:.4}", accuracies.len(), mean);
            }
        }
    }
    Ok(())
}

fn build_eval_mode(
    config: &RunConfig,
    scale_m: Option<usize>,
    strategy: Option<&str>,
    compare: &[String],
    sweep_k: &[usize],
    sweep_m: &[usize],
    sweep_strategy: &str,
) -> Result<api::EvalMode, CliError> {
    if !compare.is_empty() {
        let specs = compare
            .iter()
            .map(|raw| parse_strategy(raw, config, scale_m))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(api::EvalMode::Compare { strategies: specs });
    }
    if !sweep_k.is_empty() {
        return Ok(api::EvalMode::SweepTopK {
            strategy: parse_strategy(sweep_strategy, config, scale_m)?,
            k_values: sweep_k.to_vec(),
        });
    }
    if !sweep_m.is_empty() {
        return Ok(api::EvalMode::SweepScaling {
            strategy: config.scaling.strategy,
            m_values: sweep_m.to_vec(),
        });
    }
    match strategy {
        Some(raw) => Ok(api::EvalMode::Single {
            strategy: parse_strategy(raw, config, scale_m)?,
        }),
        None => Err(CliError::new(
            "usage",
            "choose one of --strategy, --compare, --sweep-k, or --sweep-m",
        )),
    }
}

fn delta_tsv(deltas: &[StrategyDelta]) -> String {
    let mut text = String::from("strategy_a\tstrategy_b\tdelta\n");
    for delta in deltas {
        text.push_str(&format!(
            "{}\t{}\t{}\n",
            delta.strategy_a, delta.strategy_b, delta.delta
        ));
    }
    text
}
