#![allow(dead_code)]

use std::collections::BTreeMap;

use slingkube_sim::env::{EnvConfig, Environment};

pub fn env_with(f: impl FnOnce(&mut EnvConfig)) -> Environment {
    let mut cfg = EnvConfig::default();
    f(&mut cfg);
    Environment::start(cfg).expect("environment starts")
}

pub fn env() -> Environment {
    env_with(|_| {})
}

pub fn vni(value: &str) -> BTreeMap<String, String> {
    BTreeMap::from([("vni".to_owned(), value.to_owned())])
}

pub fn none() -> BTreeMap<String, String> {
    BTreeMap::new()
}
