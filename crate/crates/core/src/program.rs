//! A loaded, analysed program ready for test generation.

use std::path::Path;

use crate::cfg::{build_cfg, Cfg, CfgError};
use crate::dataflow::{analyze, AnalysisError, DupSets, RequireSite, VariableInfo};
use crate::frontend::{load_source, FrontendError, ParseOptions, SourceUnit};
use crate::interp::Executor;
use crate::types::IntType;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{name}:{err}")]
    Frontend { name: String, err: FrontendError },
    #[error(transparent)]
    Cfg(#[from] CfgError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("no function named `{0}`")]
    UnknownFunction(String),
    #[error("source defines no functions")]
    NoFunctions,
}

/// Source, graph, analysis results and compiled executor for one entry function.
///
/// `dups` holds only the pairs of functions reachable from the entry through
/// calls; `all_dups` keeps the whole unit.
#[derive(Debug, Clone)]
pub struct Program {
    pub name: String,
    pub unit: SourceUnit,
    pub cfg: Cfg,
    pub entry: String,
    pub variables: Vec<VariableInfo>,
    pub requires: Vec<RequireSite>,
    pub all_dups: DupSets,
    pub dups: DupSets,
    pub executor: Executor,
}

impl Program {
    /// Analyses `source`. Without `entry` the first function of the first
    /// contract is used.
    pub fn from_source(
        source: &str,
        name: &str,
        entry: Option<&str>,
        options: ParseOptions,
    ) -> Result<Program, LoadError> {
        let unit = load_source(source, name, options).map_err(|err| LoadError::Frontend {
            name: name.to_string(),
            err,
        })?;
        let cfg = build_cfg(&unit)?;
        let (variables, requires, all_dups) = analyze(&unit, &cfg)?;
        let entry = match entry {
            Some(e) => cfg
                .function(e)
                .ok_or_else(|| LoadError::UnknownFunction(e.to_string()))?
                .name
                .clone(),
            None => cfg
                .functions
                .first()
                .ok_or(LoadError::NoFunctions)?
                .name
                .clone(),
        };
        let dups = all_dups.restricted_to(&cfg.call_closure(&entry));
        let executor = Executor::new(&cfg, &dups);
        Ok(Program {
            name: name.to_string(),
            unit,
            cfg,
            entry,
            variables,
            requires,
            all_dups,
            dups,
            executor,
        })
    }

    pub fn from_path(
        path: &Path,
        entry: Option<&str>,
        options: ParseOptions,
    ) -> Result<Program, LoadError> {
        let source = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Program::from_source(&source, &path.display().to_string(), entry, options)
    }

    /// Parameter types of the entry function.
    pub fn signature(&self) -> Vec<IntType> {
        self.cfg
            .function(&self.entry)
            .map(|f| f.signature())
            .unwrap_or_default()
    }

    /// Require sites inside the entry's call closure.
    pub fn reachable_requires(&self) -> Vec<&RequireSite> {
        let closure = self.cfg.call_closure(&self.entry);
        self.requires
            .iter()
            .filter(|r| closure.contains(&r.function))
            .collect()
    }
}
