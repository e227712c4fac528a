use std::fs;
use std::path::{Path, PathBuf};

use posthoc_core::bounds::{bound_for_selection, log_spaced_ks, top_k_selection};
use posthoc_core::harness::coverage::coverage_experiment;
use posthoc_core::harness::pipeline::{analyze, calibrate_methods, cluster_tables, BenchConfig, DatasetSource, MethodSpec, Observed};
use posthoc_core::harness::report::{
    cluster_table_csv, curve_csv, curve_svg, emit_coverage, emit_report, read_bundle, ReportFormat,
};
use posthoc_core::harness::sim::simulate_dataset;
use posthoc_core::stats::sign_flip_null;
use posthoc_core::{
    cluster_table, confidence_curve, drill_down, extract_clusters, read_phdat, write_phdat, Error, Result, Selection,
    SubjectStack,
};
use serde_json::json;

use crate::args::{Cli, Command, Global};

fn bench_config(g: &Global, dataset: DatasetSource, curve_points: Option<usize>) -> Result<BenchConfig> {
    let cfg = BenchConfig {
        methods: MethodSpec::parse_list(&g.methods, g.delta, g.kmax)?,
        alpha: g.alpha,
        b: g.b,
        b_train: g.b_train,
        b_calib: g.b_calib,
        z_thresholds: g.z.0.clone(),
        connectivity: g.connectivity,
        sidedness: g.sidedness,
        seed: g.seed,
        curve_points,
        dataset,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn input(g: &Global) -> Result<(PathBuf, SubjectStack)> {
    let path = g.input.clone().ok_or_else(|| Error::Param("--input <phdat> is required".into()))?;
    let stack = read_phdat(&path)?;
    Ok((path, stack))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    println!("{}", path.display());
    Ok(())
}

fn pretty(value: &serde_json::Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let formats = g.formats()?;
    match cli.command {
        Command::Simulate(sim) => {
            let cfg = sim.config(g.seed);
            let data = simulate_dataset(&cfg)?;
            fs::create_dir_all(&g.out)?;
            let path = g.out.join("sim.phdat");
            write_phdat(&data.stack, &path)?;
            println!("{}", path.display());
            let signal: Vec<usize> = data.h0.iter().enumerate().filter(|(_, &h)| !h).map(|(i, _)| i).collect();
            let truth = json!({ "config": cfg, "m": data.stack.m(), "pi0": data.pi0(), "signal_voxels": signal });
            write(&g.out, "sim_truth.json", &pretty(&truth)?)
        }
        Command::Nullcache => {
            let (_, stack) = input(g)?;
            let null = sign_flip_null(&stack, g.b, g.seed, g.sidedness)?;
            fs::create_dir_all(&g.out)?;
            let path = g.out.join("null.pnul");
            null.write(&path)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Calibrate => {
            let (path, stack) = input(g)?;
            let cfg = bench_config(g, DatasetSource::Phdat(path), None)?;
            let observed = Observed::compute(&stack, cfg.sidedness)?;
            let cal = calibrate_methods(&stack, &observed, &cfg)?;
            for f in &formats {
                match f {
                    ReportFormat::Json => {
                        let doc = json!({ "config": cfg, "calibration": cal.summaries, "templates": cal.templates });
                        write(&g.out, "templates.json", &pretty(&doc)?)?;
                    }
                    ReportFormat::Csv => {
                        let mut s = format!("# config: {}\nmethod,K,lambda_star,k_alpha,B\n", serde_json::to_string(&cfg)?);
                        for c in &cal.summaries {
                            let opt = |v: Option<String>| v.unwrap_or_default();
                            s += &format!(
                                "{},{},{},{},{}\n",
                                c.method,
                                c.k,
                                opt(c.lambda_star.map(|v| v.to_string())),
                                opt(c.k_alpha.map(|v| v.to_string())),
                                opt(c.b.map(|v| v.to_string()))
                            );
                        }
                        write(&g.out, "calibration.csv", &s)?;
                    }
                    ReportFormat::Svg => return Err(Error::Param("calibrate has no SVG output".into())),
                }
            }
            Ok(())
        }
        Command::Bound { indices, top_k } => {
            let (path, stack) = input(g)?;
            let cfg = bench_config(g, DatasetSource::Phdat(path), None)?;
            let observed = Observed::compute(&stack, cfg.sidedness)?;
            let selection = match (indices, top_k) {
                (Some(list), None) => {
                    let idx = list
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| s.trim().parse::<usize>().map_err(|e| Error::Param(format!("bad index {s:?}: {e}"))))
                        .collect::<Result<Vec<_>>>()?;
                    Selection::new(idx, stack.m())?
                }
                (None, Some(k)) => top_k_selection(&observed.zmap, k)?,
                _ => return Err(Error::Param("give exactly one of --indices or --top-k".into())),
            };
            let cal = calibrate_methods(&stack, &observed, &cfg)?;
            let mut bounds = serde_json::Map::new();
            let mut csv = format!("# config: {}\nmethod,discoveries,size,bound\n", serde_json::to_string(&cfg)?);
            for (name, t) in &cal.templates {
                let b = bound_for_selection(&observed.p, &selection, t)?;
                csv += &format!("{name},{},{},{}\n", b.discoveries, b.size, b.value());
                bounds.insert(name.clone(), json!({ "discoveries": b.discoveries, "size": b.size, "bound": b.value() }));
            }
            for f in &formats {
                match f {
                    ReportFormat::Json => {
                        let doc = json!({ "config": cfg, "size": selection.len(), "bounds": bounds });
                        write(&g.out, "bound.json", &pretty(&doc)?)?;
                    }
                    ReportFormat::Csv => write(&g.out, "bound.csv", &csv)?,
                    ReportFormat::Svg => return Err(Error::Param("bound has no SVG output".into())),
                }
            }
            Ok(())
        }
        Command::Clusters => {
            let (path, stack) = input(g)?;
            let cfg = bench_config(g, DatasetSource::Phdat(path), None)?;
            let observed = Observed::compute(&stack, cfg.sidedness)?;
            let cal = calibrate_methods(&stack, &observed, &cfg)?;
            let tables = cluster_tables(&observed, &cal.templates, &cfg)?;
            let methods: Vec<String> = cal.templates.keys().cloned().collect();
            let cfg_json = serde_json::to_string(&cfg)?;
            for f in &formats {
                match f {
                    ReportFormat::Csv => {
                        for t in &tables {
                            write(&g.out, &format!("clusters_z{}.csv", t.z_threshold), &cluster_table_csv(t, &methods, &cfg_json)?)?;
                        }
                    }
                    ReportFormat::Json => {
                        let doc = json!({ "config": cfg, "calibration": cal.summaries, "tables": tables });
                        write(&g.out, "clusters.json", &pretty(&doc)?)?;
                    }
                    ReportFormat::Svg => return Err(Error::Param("clusters has no SVG output; use bench".into())),
                }
            }
            Ok(())
        }
        Command::Drill { cluster, z_new } => {
            let (path, stack) = input(g)?;
            let cfg = bench_config(g, DatasetSource::Phdat(path), None)?;
            let z_parent = *cfg.z_thresholds.first().ok_or_else(|| Error::Param("--z must name the parent threshold".into()))?;
            let observed = Observed::compute(&stack, cfg.sidedness)?;
            let parents = extract_clusters(&observed.zmap, z_parent, cfg.connectivity)?;
            let parent = parents
                .iter()
                .find(|c| c.id == cluster)
                .ok_or_else(|| Error::Param(format!("no cluster {cluster} at z = {z_parent} ({} clusters)", parents.len())))?;
            let children = drill_down(parent, &observed.zmap, z_new, cfg.connectivity)?;
            let cal = calibrate_methods(&stack, &observed, &cfg)?;
            let parent_table = cluster_table(z_parent, cfg.connectivity, std::slice::from_ref(parent), &observed.p, &cal.templates)?;
            let table = cluster_table(z_new, cfg.connectivity, &children, &observed.p, &cal.templates)?;
            let methods: Vec<String> = cal.templates.keys().cloned().collect();
            let cfg_json = serde_json::to_string(&json!({ "bench": cfg, "parent": cluster, "z_new": z_new }))?;
            for f in &formats {
                match f {
                    ReportFormat::Csv => {
                        write(&g.out, &format!("drill_c{cluster}_z{z_new}.csv"), &cluster_table_csv(&table, &methods, &cfg_json)?)?
                    }
                    ReportFormat::Json => {
                        let doc = json!({ "config": cfg, "parent": parent_table.rows, "z_new": z_new, "children": table });
                        write(&g.out, &format!("drill_c{cluster}_z{z_new}.json"), &pretty(&doc)?)?;
                    }
                    ReportFormat::Svg => return Err(Error::Param("drill has no SVG output".into())),
                }
            }
            Ok(())
        }
        Command::Curve { points } => {
            let (path, stack) = input(g)?;
            let cfg = bench_config(g, DatasetSource::Phdat(path), points)?;
            let observed = Observed::compute(&stack, cfg.sidedness)?;
            let cal = calibrate_methods(&stack, &observed, &cfg)?;
            let m = stack.m();
            let ks: Vec<usize> = points.map_or_else(|| (1..=m).collect(), |n| log_spaced_ks(m, n));
            let curve = confidence_curve(&observed.zmap, &observed.p, &cal.templates, &ks)?;
            let cfg_json = serde_json::to_string(&cfg)?;
            for f in &formats {
                match f {
                    ReportFormat::Csv => write(&g.out, "curve.csv", &curve_csv(&curve, &cfg_json)?)?,
                    ReportFormat::Json => write(&g.out, "curve.json", &pretty(&json!({ "config": cfg, "curve": curve }))?)?,
                    ReportFormat::Svg => write(&g.out, "curve.svg", &curve_svg(&curve, &cfg_json))?,
                }
            }
            Ok(())
        }
        Command::Bench { sim, points } => {
            let dataset = match &g.input {
                Some(p) => DatasetSource::Phdat(p.clone()),
                None => DatasetSource::Simulated(sim.config(g.seed)),
            };
            let cfg = bench_config(g, dataset, points)?;
            let bundle = match &cfg.dataset {
                DatasetSource::Phdat(p) => analyze(&read_phdat(p)?, None, &cfg)?,
                DatasetSource::Simulated(s) => {
                    let data = simulate_dataset(s)?;
                    analyze(&data.stack, Some(&data.h0), &cfg)?
                }
            };
            for path in emit_report(&bundle, &formats, &g.out)? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Coverage { sim, reps } => {
            let sim_cfg = sim.config(g.seed);
            let cfg = bench_config(g, DatasetSource::Simulated(sim_cfg.clone()), None)?;
            let report = coverage_experiment(&sim_cfg, &cfg, reps)?;
            for path in emit_coverage(&report, &formats, &g.out)? {
                println!("{}", path.display());
            }
            for m in &report.methods {
                eprintln!(
                    "{}: {}/{} violations, frequency {:.4} (95% CI {:.4}-{:.4}), budget {:.4}",
                    m.method, m.violations, report.n_reps, m.frequency, m.wilson_low, m.wilson_high, m.budget
                );
            }
            Ok(())
        }
        Command::Report { bundle } => {
            let bundle = read_bundle(&bundle)?;
            for path in emit_report(&bundle, &formats, &g.out)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}
