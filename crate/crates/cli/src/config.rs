//! Scenario configuration files.
//!
//! A config is `{"scenarios": [...]}`. Plant parameters and simulation
//! settings only need to state deviations from the built-in defaults.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use safeqp::frameworks::{FrameworkConfig, Method};
use safeqp::plants::{AccParams, DoubleIntegratorParams, Plant};
use safeqp::sim::{SimConfig, GOAL_TOLERANCE};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlantName {
    Acc,
    DoubleIntegrator,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlantSpec {
    Acc(AccParams),
    DoubleIntegrator(DoubleIntegratorParams),
}

impl PlantSpec {
    pub fn name(&self) -> PlantName {
        match self {
            PlantSpec::Acc(_) => PlantName::Acc,
            PlantSpec::DoubleIntegrator(_) => PlantName::DoubleIntegrator,
        }
    }

    pub fn plant(&self) -> safeqp::Result<Plant> {
        match self {
            PlantSpec::Acc(p) => p.plant(),
            PlantSpec::DoubleIntegrator(p) => p.plant(),
        }
    }

    pub fn framework_config(&self, method: Method) -> FrameworkConfig {
        match self {
            PlantSpec::Acc(p) => p.framework_config(method),
            PlantSpec::DoubleIntegrator(p) => p.framework_config(method),
        }
    }

    fn params_value(&self) -> Value {
        match self {
            PlantSpec::Acc(p) => serde_json::to_value(p),
            PlantSpec::DoubleIntegrator(p) => serde_json::to_value(p),
        }
        .expect("plant parameters serialize")
    }
}

/// ACC runs 20 s; double-integrator runs 15 s or until the goal is reached.
pub fn default_sim(plant: PlantName) -> SimConfig {
    match plant {
        PlantName::Acc => SimConfig::default(),
        PlantName::DoubleIntegrator => SimConfig {
            horizon: 15.0,
            goal_tolerance: Some(GOAL_TOLERANCE),
            ..SimConfig::default()
        },
    }
}

/// A framework plus optional overrides of the plant's weights. In a config
/// this is either a bare method name or an object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

impl MethodSpec {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            p: None,
            p_omega: None,
            omega0: None,
            gamma0: None,
            q: None,
        }
    }

    pub fn apply(&self, mut cfg: FrameworkConfig) -> FrameworkConfig {
        cfg.method = self.method;
        if let Some(p) = self.p {
            cfg.p = p;
        }
        if let Some(p) = self.p_omega {
            cfg.p_omega = p;
        }
        if let Some(w) = self.omega0 {
            cfg.omega0 = w;
        }
        if self.gamma0.is_some() {
            cfg.gamma0 = self.gamma0;
        }
        if let Some(q) = self.q {
            cfg.q = q;
        }
        cfg
    }

    fn set(&mut self, parameter: SweepParameter, value: f64) {
        let slot = match parameter {
            SweepParameter::P => &mut self.p,
            SweepParameter::POmega => &mut self.p_omega,
            SweepParameter::Omega0 => &mut self.omega0,
            SweepParameter::Gamma0 => &mut self.gamma0,
            SweepParameter::Q => &mut self.q,
        };
        *slot = Some(value);
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MethodFields {
    method: Method,
    #[serde(default)]
    p: Option<f64>,
    #[serde(default)]
    p_omega: Option<f64>,
    #[serde(default)]
    omega0: Option<f64>,
    #[serde(default)]
    gamma0: Option<f64>,
    #[serde(default)]
    q: Option<f64>,
}

fn method_spec<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<MethodSpec, D::Error> {
    match Value::deserialize(d)? {
        Value::String(name) => name.parse().map(MethodSpec::new).map_err(D::Error::custom),
        v @ Value::Object(_) => {
            let f: MethodFields = serde_json::from_value(v).map_err(D::Error::custom)?;
            Ok(MethodSpec {
                method: f.method,
                p: f.p,
                p_omega: f.p_omega,
                omega0: f.omega0,
                gamma0: f.gamma0,
                q: f.q,
            })
        }
        other => Err(D::Error::custom(format!(
            "expected a method name or object, got {other}"
        ))),
    }
}

fn method_specs<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<MethodSpec>, D::Error> {
    #[derive(Deserialize)]
    struct Wrapped(#[serde(deserialize_with = "method_spec")] MethodSpec);
    Ok(Vec::<Wrapped>::deserialize(d)?
        .into_iter()
        .map(|w| w.0)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    P,
    POmega,
    Omega0,
    Gamma0,
    Q,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::P => "p",
            SweepParameter::POmega => "p_omega",
            SweepParameter::Omega0 => "omega0",
            SweepParameter::Gamma0 => "gamma0",
            SweepParameter::Q => "q",
        }
    }
}

/// Runs `methods` once per value of `parameter`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    #[serde(deserialize_with = "method_specs")]
    pub methods: Vec<MethodSpec>,
}

/// Declared outcome for every run of one method. Unset fields are not checked.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collision: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_infeasible_steps: Option<usize>,
    /// First infeasible step strictly after `t = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infeasible_after_start: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reaches_goal: Option<bool>,
    /// Speed enters the settling band before the horizon (ACC).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settles: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub id: String,
    pub description: String,
    pub plant: PlantSpec,
    pub methods: Vec<MethodSpec>,
    pub sim: SimConfig,
    pub sweep: Option<Sweep>,
    /// Keyed by method name.
    pub expect: BTreeMap<String, Expectation>,
}

/// One simulation to execute.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub method: MethodSpec,
    pub sweep: Option<(SweepParameter, f64)>,
}

impl RunPlan {
    /// `<scenario>__<method>[__<parameter>-<value>]`.
    pub fn file_stem(&self, scenario: &str) -> String {
        let mut stem = format!("{scenario}__{}", self.method.method);
        if let Some((param, value)) = self.sweep {
            stem.push_str(&format!("__{}-{value:?}", param.name()));
        }
        stem
    }
}

impl ScenarioSpec {
    pub fn runs(&self) -> Vec<RunPlan> {
        let mut runs: Vec<RunPlan> = self
            .methods
            .iter()
            .map(|&method| RunPlan {
                method,
                sweep: None,
            })
            .collect();
        if let Some(sweep) = &self.sweep {
            for &value in &sweep.values {
                for method in &sweep.methods {
                    let mut method = *method;
                    method.set(sweep.parameter, value);
                    runs.push(RunPlan {
                        method,
                        sweep: Some((sweep.parameter, value)),
                    });
                }
            }
        }
        runs
    }

    pub fn framework_config(&self, run: &RunPlan) -> FrameworkConfig {
        run.method
            .apply(self.plant.framework_config(run.method.method))
    }

    /// SHA-256 over everything that determines the run's trajectory.
    pub fn config_hash(&self, run: &RunPlan) -> String {
        let canonical = serde_json::json!({
            "plant": self.plant.name(),
            "plant_params": self.plant.params_value(),
            "method": run.method,
            "sim": self.sim,
        });
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty()
            || !self
                .id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(format!(
                "scenario id `{}` must be nonempty and use only [A-Za-z0-9_-]",
                self.id
            ));
        }
        if self.methods.is_empty() && self.sweep.is_none() {
            return Err("`methods` must list at least one method".into());
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() || sweep.methods.is_empty() {
                return Err("sweep needs at least one value and one method".into());
            }
            if let Some(v) = sweep.values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(format!("sweep value {v} must be positive"));
            }
        }
        let mut seen = BTreeSet::new();
        for run in self.runs() {
            if !seen.insert(run.file_stem(&self.id)) {
                return Err(format!("run `{}` is listed twice", run.file_stem(&self.id)));
            }
        }
        let listed: BTreeSet<&str> = self.runs().iter().map(|r| r.method.method.name()).collect();
        for key in self.expect.keys() {
            let method: Method = key.parse().map_err(|e| format!("expect: {e}"))?;
            if !listed.contains(method.name()) {
                return Err(format!(
                    "expect: method `{key}` is not run by this scenario"
                ));
            }
        }
        self.sim.validate().map_err(|e| format!("sim: {e}"))?;
        let plant = self
            .plant
            .plant()
            .map_err(|e| format!("plant_params: {e}"))?;
        for run in self.runs() {
            self.framework_config(&run)
                .validate(plant.system.input_dim())
                .map_err(|e| format!("method `{}`: {e}", run.method.method))?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    description: String,
    plant: PlantName,
    #[serde(default)]
    plant_params: Map<String, Value>,
    #[serde(default, deserialize_with = "method_specs")]
    methods: Vec<MethodSpec>,
    #[serde(default)]
    sim: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sweep: Option<Sweep>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    expect: BTreeMap<String, Expectation>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenarios: Vec<RawScenario>,
}

fn as_map(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("structs serialize to objects"),
    }
}

impl RawScenario {
    fn resolve(self) -> std::result::Result<ScenarioSpec, String> {
        let params = Value::Object(self.plant_params);
        let plant = match self.plant {
            PlantName::Acc => serde_json::from_value(params).map(PlantSpec::Acc),
            PlantName::DoubleIntegrator => {
                serde_json::from_value(params).map(PlantSpec::DoubleIntegrator)
            }
        }
        .map_err(|e| format!("plant_params: {e}"))?;
        let mut sim =
            as_map(serde_json::to_value(default_sim(self.plant)).expect("sim serializes"));
        sim.extend(self.sim);
        let sim = serde_json::from_value(Value::Object(sim)).map_err(|e| format!("sim: {e}"))?;
        let spec = ScenarioSpec {
            id: self.id,
            description: self.description,
            plant,
            methods: self.methods,
            sim,
            sweep: self.sweep,
            expect: self.expect,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn from_spec(spec: &ScenarioSpec) -> Self {
        RawScenario {
            id: spec.id.clone(),
            description: spec.description.clone(),
            plant: spec.plant.name(),
            plant_params: as_map(spec.plant.params_value()),
            methods: spec.methods.clone(),
            sim: as_map(serde_json::to_value(&spec.sim).expect("sim serializes")),
            sweep: spec.sweep.clone(),
            expect: spec.expect.clone(),
        }
    }
}

/// Parses and validates config text. `origin` names the source in errors.
pub fn parse_config_str(text: &str, origin: &str) -> Result<Vec<ScenarioSpec>> {
    let raw: RawConfig =
        serde_json::from_str(text).map_err(|e| CliError::config(origin, e.to_string()))?;
    let mut ids = BTreeSet::new();
    let mut specs = Vec::with_capacity(raw.scenarios.len());
    for (i, scenario) in raw.scenarios.into_iter().enumerate() {
        let id = scenario.id.clone();
        if !ids.insert(id.clone()) {
            return Err(CliError::config(
                origin,
                format!("scenario id `{id}` appears more than once"),
            ));
        }
        let spec = scenario
            .resolve()
            .map_err(|e| CliError::config(origin, format!("scenarios[{i}] (`{id}`): {e}")))?;
        specs.push(spec);
    }
    Ok(specs)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<Vec<ScenarioSpec>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::config(
            path.display().to_string(),
            format!("cannot read config: {e}"),
        )
    })?;
    parse_config_str(&text, &path.display().to_string())
}

/// Pretty JSON config holding `specs`, with every default written out.
pub fn to_config_json(specs: &[ScenarioSpec]) -> String {
    let raw = RawConfig {
        scenarios: specs.iter().map(RawScenario::from_spec).collect(),
    };
    serde_json::to_string_pretty(&raw).expect("config serializes")
}
