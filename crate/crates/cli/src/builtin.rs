//! Scenarios shipped with the binary.

use crate::config::{parse_config_str, ScenarioSpec};
use crate::error::{CliError, Result};

pub const BUILTIN: &[(&str, &str)] = &[
    ("acc-case1", include_str!("../scenarios/acc-case1.json")),
    ("acc-case2", include_str!("../scenarios/acc-case2.json")),
    ("acc-case3", include_str!("../scenarios/acc-case3.json")),
    ("acc-case4", include_str!("../scenarios/acc-case4.json")),
    ("acc-sweep-p", include_str!("../scenarios/acc-sweep-p.json")),
    ("agv-a", include_str!("../scenarios/agv-a.json")),
    ("agv-b", include_str!("../scenarios/agv-b.json")),
    ("agv-multi", include_str!("../scenarios/agv-multi.json")),
];

pub fn builtin_scenarios() -> Result<Vec<ScenarioSpec>> {
    let mut all = Vec::new();
    for (id, text) in BUILTIN {
        all.extend(parse_config_str(text, &format!("built-in `{id}`"))?);
    }
    Ok(all)
}

pub fn builtin(id: &str) -> Result<ScenarioSpec> {
    let (_, text) = BUILTIN
        .iter()
        .find(|(name, _)| *name == id)
        .ok_or_else(|| CliError::config("built-in scenarios", format!("no scenario `{id}`")))?;
    let mut specs = parse_config_str(text, &format!("built-in `{id}`"))?;
    Ok(specs.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{to_config_json, PlantSpec};
    use safeqp::plants::{DoubleIntegratorParams, Obstacle};

    #[test]
    fn every_builtin_parses_under_its_own_id() {
        for (id, _) in BUILTIN {
            assert_eq!(builtin(id).unwrap().id, *id);
        }
        assert_eq!(builtin_scenarios().unwrap().len(), BUILTIN.len());
        assert!(builtin("acc-case9").is_err());
    }

    #[test]
    fn acc_case1_settings() {
        match builtin("acc-case1").unwrap().plant {
            PlantSpec::Acc(p) => {
                assert_eq!(p.s0, [0.0, 20.0, 100.0]);
                assert_eq!(p.v_d, 10.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn agv_multi_obstacles() {
        let expect = [
            ([5.0, 3.0], 1.0),
            ([4.0, 1.0], 1.0),
            ([9.0, 1.0], 1.0),
            ([1.0, 4.0], 0.5),
            ([3.0, 3.0], 0.5),
            ([6.0, 1.0], 0.3),
        ];
        match builtin("agv-multi").unwrap().plant {
            PlantSpec::DoubleIntegrator(p) => {
                let want: Vec<Obstacle> =
                    expect.iter().map(|&(c, r)| Obstacle::new(c, r)).collect();
                assert_eq!(p.obstacles, want);
                assert_eq!(p, DoubleIntegratorParams::multi_obstacle());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn builtins_round_trip() {
        let specs = builtin_scenarios().unwrap();
        let again = parse_config_str(&to_config_json(&specs), "round trip").unwrap();
        assert_eq!(specs, again);
    }
}
