//! The run configuration file: `{search, roles, sandbox, rates}`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::executor::{
    ExecOptions, ExecutorError, SandboxPolicy, SimulatedRuntime, SubprocessRuntime, WorkerRuntime, DEFAULT_GRACE_S,
    DEFAULT_LOG_CAP_BYTES,
};
use crate::operators::{
    ChatModelClient, ChatReply, ClientError, OpenAiClient, OpenAiConfig, Rate, Role, RoleMap, ScriptedClient, Templates,
};
use crate::search::SearchConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config does not parse at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Executor(#[from] ExecutorError),
    #[error("io error reading config resources: {0}")]
    Io(#[from] std::io::Error),
}

/// One replayed reply: bare text or text with usage counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptedReplyConfig {
    Text(String),
    Full(ChatReply),
}

impl From<ScriptedReplyConfig> for ChatReply {
    fn from(c: ScriptedReplyConfig) -> Self {
        match c {
            ScriptedReplyConfig::Text(t) => ChatReply::text(t),
            ScriptedReplyConfig::Full(r) => r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ClientConfig {
    Openai(OpenAiConfig),
    Scripted {
        model: String,
        responses: Vec<ScriptedReplyConfig>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bindings {
    pub propose: String,
    pub repair: String,
    pub improve: String,
    pub critic: String,
    pub reflect: String,
}

impl Bindings {
    fn get(&self, role: Role) -> &str {
        match role {
            Role::Propose => &self.propose,
            Role::Repair => &self.repair,
            Role::Improve => &self.improve,
            Role::Critic => &self.critic,
            Role::Reflect => &self.reflect,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolesConfig {
    pub clients: BTreeMap<String, ClientConfig>,
    pub bindings: Bindings,
}

impl RolesConfig {
    /// Builds each named client once; roles bound to the same name share it.
    pub fn build(&self) -> Result<RoleMap, ConfigError> {
        let mut built: BTreeMap<&str, Arc<dyn ChatModelClient>> = BTreeMap::new();
        let mut map: BTreeMap<Role, Arc<dyn ChatModelClient>> = BTreeMap::new();
        for role in Role::ALL {
            let name = self.bindings.get(role);
            if !built.contains_key(name) {
                let cfg = self
                    .clients
                    .get(name)
                    .ok_or_else(|| ConfigError::Invalid(format!("role {role} is bound to unknown client `{name}`")))?;
                let client: Arc<dyn ChatModelClient> = match cfg {
                    ClientConfig::Openai(c) => Arc::new(OpenAiClient::from_env(c.clone())?),
                    ClientConfig::Scripted { model, responses } => Arc::new(ScriptedClient::new(
                        model.clone(),
                        responses.iter().cloned().map(ChatReply::from),
                    )),
                };
                built.insert(name, client);
            }
            map.insert(role, built[name].clone());
        }
        RoleMap::new(map).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RuntimeConfig {
    /// `command... <solver> <instance> <deadline>` per instance.
    Subprocess { command: Vec<String> },
    /// In-process event-script interpreter; no code is run.
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SandboxConfig {
    pub runtime: RuntimeConfig,
    #[serde(default = "default_memory_limit")]
    pub memory_limit_mb: Option<u64>,
    #[serde(default = "default_true")]
    pub isolate_network: bool,
    /// Run without network isolation when the host cannot provide it.
    #[serde(default)]
    pub insecure_override: bool,
    #[serde(default = "default_grace")]
    pub grace_s: f64,
    #[serde(default = "default_log_cap")]
    pub log_cap_bytes: usize,
    #[serde(default)]
    pub strict_crash_voids_yields: bool,
    #[serde(default = "default_solver_file")]
    pub solver_file_name: String,
    /// Parent directory for per-worker scratch directories.
    #[serde(default)]
    pub scratch_root: Option<PathBuf>,
}

fn default_memory_limit() -> Option<u64> {
    Some(4096)
}

fn default_true() -> bool {
    true
}

fn default_grace() -> f64 {
    DEFAULT_GRACE_S
}

fn default_log_cap() -> usize {
    DEFAULT_LOG_CAP_BYTES
}

fn default_solver_file() -> String {
    "solver.py".to_string()
}

impl SandboxConfig {
    pub fn simulated() -> Self {
        SandboxConfig {
            runtime: RuntimeConfig::Simulated,
            memory_limit_mb: None,
            isolate_network: false,
            insecure_override: false,
            grace_s: DEFAULT_GRACE_S,
            log_cap_bytes: DEFAULT_LOG_CAP_BYTES,
            strict_crash_voids_yields: false,
            solver_file_name: default_solver_file(),
            scratch_root: None,
        }
    }

    /// Resolves the sandbox policy against the host and builds the runtime.
    pub fn build_runtime(&self) -> Result<Arc<dyn WorkerRuntime>, ConfigError> {
        match &self.runtime {
            RuntimeConfig::Simulated => Ok(Arc::new(SimulatedRuntime::dsl())),
            RuntimeConfig::Subprocess { command } => {
                if command.is_empty() {
                    return Err(ConfigError::Invalid("sandbox.runtime.command is empty".into()));
                }
                let policy = SandboxPolicy::resolve(
                    SandboxPolicy {
                        isolate_network: self.isolate_network,
                        memory_limit_mb: self.memory_limit_mb,
                    },
                    self.insecure_override,
                )?;
                let mut rt = SubprocessRuntime::new(command.clone(), self.solver_file_name.clone(), policy);
                if let Some(root) = &self.scratch_root {
                    rt = rt.with_scratch_root(root.clone());
                }
                Ok(Arc::new(rt))
            }
        }
    }

    /// Options for one execution; timeout and parallelism are filled from the search config.
    pub fn exec_options(&self, search: &SearchConfig) -> ExecOptions {
        ExecOptions {
            timeout_s: search.timeout_s,
            grace_s: self.grace_s,
            parallelism: search.parallelism,
            log_cap_bytes: self.log_cap_bytes,
            strict_crash_voids_yields: self.strict_crash_voids_yields,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub search: SearchConfig,
    pub roles: RolesConfig,
    pub sandbox: SandboxConfig,
    /// Per-token prices keyed by model name.
    #[serde(default)]
    pub rates: BTreeMap<String, Rate>,
    /// Directory overriding the built-in prompt templates.
    #[serde(default)]
    pub templates_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_value(value: Value) -> Result<Self, ConfigError> {
        let config: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| ConfigError::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.search
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.sandbox.grace_s.is_finite() && self.sandbox.grace_s >= 0.0) {
            return Err(ConfigError::Invalid("sandbox.grace_s must be non-negative".into()));
        }
        for role in Role::ALL {
            let name = self.roles.bindings.get(role);
            if !self.roles.clients.contains_key(name) {
                return Err(ConfigError::Invalid(format!("role {role} is bound to unknown client `{name}`")));
            }
        }
        Ok(())
    }

    pub fn templates(&self) -> Result<Templates, ConfigError> {
        match &self.templates_dir {
            Some(dir) => Ok(Templates::from_dir(dir)?),
            None => Ok(Templates::builtin()),
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
