use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;

use super::{io_err, CliError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Markdown,
    Csv,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TableOutput {
    pub text: String,
    pub warnings: Vec<String>,
}

#[derive(Debug, Default)]
struct RunRecord {
    fields: Vec<String>,
    scalars: Vec<String>,
    metrics: Option<BTreeMap<String, f64>>,
}

#[derive(serde::Deserialize, Default)]
struct InfoHeader {
    problem: Option<String>,
    model: Option<String>,
    #[serde(default)]
    fields: Vec<String>,
    #[serde(default)]
    scalars: Vec<String>,
}

fn model_dirs(root: &Path) -> Vec<PathBuf> {
    let subs: Vec<PathBuf> = ["kan", "mlp"]
        .iter()
        .map(|m| root.join(m))
        .filter(|d| d.is_dir())
        .collect();
    if subs.is_empty() {
        vec![root.to_path_buf()]
    } else {
        subs
    }
}

fn base_name(p: &Path) -> Option<String> {
    p.file_name().map(|s| s.to_string_lossy().into_owned())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Collects `metrics.json` from run roots (containing `kan/` and `mlp/`) or
/// model directories, and lays them out as one Criteria x Model table per
/// problem.
pub fn table(dirs: &[PathBuf], format: TableFormat) -> Result<TableOutput, CliError> {
    if dirs.is_empty() {
        return Err(CliError::Usage("table needs at least one result directory".into()));
    }
    let mut warnings = Vec::new();
    let mut problems: Vec<String> = Vec::new();
    let mut models: Vec<String> = Vec::new();
    let mut runs: BTreeMap<(String, String), RunRecord> = BTreeMap::new();

    for root in dirs {
        if !root.is_dir() {
            return Err(CliError::Usage(format!("{} is not a directory", root.display())));
        }
        for dir in model_dirs(root) {
            let info_path = dir.join("run_info.json");
            let info: InfoHeader = if info_path.is_file() {
                read_json(&info_path)?
            } else {
                InfoHeader::default()
            };
            let model = info
                .model
                .or_else(|| base_name(&dir))
                .unwrap_or_else(|| "model".into());
            let problem = info
                .problem
                .or_else(|| dir.parent().and_then(base_name))
                .unwrap_or_else(|| "problem".into());
            let metrics_path = dir.join("metrics.json");
            let metrics = if metrics_path.is_file() {
                Some(read_json::<BTreeMap<String, f64>>(&metrics_path)?)
            } else {
                warnings.push(format!("{}: missing metrics.json, cell left blank", dir.display()));
                None
            };
            if !problems.contains(&problem) {
                problems.push(problem.clone());
            }
            if !models.contains(&model) {
                models.push(model.clone());
            }
            let key = (problem.clone(), model.clone());
            if runs.contains_key(&key) {
                warnings.push(format!(
                    "duplicate run for {problem}/{model}; using {}",
                    dir.display()
                ));
            }
            runs.insert(
                key,
                RunRecord {
                    fields: info.fields,
                    scalars: info.scalars,
                    metrics,
                },
            );
        }
    }
    models.sort_by_key(|m| match m.as_str() {
        "kan" => 0,
        "mlp" => 1,
        _ => 2,
    });

    let mut text = String::new();
    if format == TableFormat::Csv {
        text.push_str("problem,criterion");
        for m in &models {
            text.push(',');
            text.push_str(m);
        }
        text.push('\n');
    }
    for problem in &problems {
        let rows = criteria(problem, &models, &runs);
        let cell = |model: &String, key: &str| -> String {
            runs.get(&(problem.clone(), model.clone()))
                .and_then(|r| r.metrics.as_ref())
                .and_then(|m| m.get(key))
                .map(|v| format!("{v:.2e}"))
                .unwrap_or_default()
        };
        match format {
            TableFormat::Markdown => {
                if !text.is_empty() {
                    text.push('\n');
                }
                text.push_str(&format!("### {problem}\n\n| Criteria |"));
                for m in &models {
                    text.push_str(&format!(" {} |", m.to_uppercase()));
                }
                text.push_str("\n|---|");
                text.push_str(&"---|".repeat(models.len()));
                text.push('\n');
                for (name, key) in &rows {
                    text.push_str(&format!("| {name} |"));
                    for m in &models {
                        text.push_str(&format!(" {} |", cell(m, key)));
                    }
                    text.push('\n');
                }
            }
            TableFormat::Csv => {
                for (name, key) in &rows {
                    text.push_str(&format!("{problem},{name}"));
                    for m in &models {
                        text.push(',');
                        text.push_str(&cell(m, key));
                    }
                    text.push('\n');
                }
            }
        }
    }
    Ok(TableOutput { text, warnings })
}

/// Row labels and metric keys: the cost, each field's MAE, then scalars.
fn criteria(
    problem: &str,
    models: &[String],
    runs: &BTreeMap<(String, String), RunRecord>,
) -> Vec<(String, String)> {
    let records: Vec<&RunRecord> = models
        .iter()
        .filter_map(|m| runs.get(&(problem.to_string(), m.clone())))
        .collect();
    let mut fields: Vec<String> = Vec::new();
    let mut scalars: Vec<String> = Vec::new();
    for r in &records {
        for f in &r.fields {
            if !fields.contains(f) {
                fields.push(f.clone());
            }
        }
        for s in &r.scalars {
            if !scalars.contains(s) {
                scalars.push(s.clone());
            }
        }
    }
    if fields.is_empty() {
        // no run_info: fall back to the mae_ keys
        for r in &records {
            for k in r.metrics.iter().flat_map(|m| m.keys()) {
                if let Some(f) = k.strip_prefix("mae_") {
                    if !fields.iter().any(|x| x == f) {
                        fields.push(f.to_string());
                    }
                }
            }
        }
    }
    let mut rows = vec![("J".to_string(), "J".to_string())];
    rows.extend(fields.into_iter().map(|f| (f.clone(), format!("mae_{f}"))));
    rows.extend(scalars.into_iter().map(|s| (s.clone(), s)));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_run(root: &Path, model: &str, problem: &str, j: f64, with_metrics: bool) {
        let dir = root.join(model);
        fs::create_dir_all(&dir).unwrap();
        fs::write(
            dir.join("run_info.json"),
            format!(
                r#"{{"problem":"{problem}","model":"{model}","fields":["psi","xi1","xi2"],"scalars":[]}}"#
            ),
        )
        .unwrap();
        if with_metrics {
            fs::write(
                dir.join("metrics.json"),
                format!(r#"{{"J":{j},"mae_psi":1e-3,"mae_xi1":2e-4,"mae_xi2":3e-4,"wall_time_s":0}}"#),
            )
            .unwrap();
        }
    }

    #[test]
    fn two_models_give_two_columns_and_four_rows() {
        let tmp = tempfile::tempdir().unwrap();
        write_run(tmp.path(), "kan", "frac_forward", 7.7e-8, true);
        write_run(tmp.path(), "mlp", "frac_forward", 3e-6, true);
        let out = table(&[tmp.path().to_path_buf()], TableFormat::Markdown).unwrap();
        assert!(out.warnings.is_empty());
        let lines: Vec<&str> = out.text.lines().collect();
        assert_eq!(lines[0], "### frac_forward");
        assert_eq!(lines[2], "| Criteria | KAN | MLP |");
        let body: Vec<&str> = lines[4..].to_vec();
        assert_eq!(body.len(), 4);
        assert_eq!(body[0], "| J | 7.70e-8 | 3.00e-6 |");
        assert!(body[1].starts_with("| psi |"));
        assert!(body[3].starts_with("| xi2 |"));
    }

    #[test]
    fn csv_layout() {
        let tmp = tempfile::tempdir().unwrap();
        write_run(tmp.path(), "kan", "ide", 1e-3, true);
        let out = table(&[tmp.path().to_path_buf()], TableFormat::Csv).unwrap();
        let lines: Vec<&str> = out.text.lines().collect();
        assert_eq!(lines[0], "problem,criterion,kan");
        assert_eq!(lines[1], "ide,J,1.00e-3");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn missing_metrics_is_blank_with_warning() {
        let tmp = tempfile::tempdir().unwrap();
        write_run(tmp.path(), "kan", "ide", 1e-3, true);
        write_run(tmp.path(), "mlp", "ide", 0.0, false);
        let out = table(&[tmp.path().to_path_buf()], TableFormat::Markdown).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("missing metrics.json"));
        assert!(out.text.contains("| J | 1.00e-3 |  |"));
    }

    #[test]
    fn later_duplicate_wins() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_run(a.path(), "kan", "ide", 1.0, true);
        write_run(b.path(), "kan", "ide", 2.0, true);
        let out = table(
            &[a.path().to_path_buf(), b.path().to_path_buf()],
            TableFormat::Csv,
        )
        .unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("duplicate"));
        assert!(out.text.contains("ide,J,2.00e0"));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(table(&[], TableFormat::Markdown).is_err());
    }

    #[test]
    fn model_dir_without_run_info_uses_directory_names() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("pde2d").join("kan");
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join("metrics.json"), r#"{"J":0.5,"mae_psi":0.1,"mae_xi":0.2}"#).unwrap();
        let out = table(&[dir], TableFormat::Csv).unwrap();
        assert_eq!(out.text, "problem,criterion,kan\npde2d,J,5.00e-1\npde2d,psi,1.00e-1\npde2d,xi,2.00e-1\n");
    }
}
