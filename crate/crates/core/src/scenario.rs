//! Game data: states, prior, network, polynomial latencies and demand.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the prior summing to one.
pub const PRIOR_SUM_TOL: f64 = 1e-12;
/// Tolerance on flow masses.
pub const MASS_TOL: f64 = 1e-9;

/// Polynomial latency `l(f) = sum_d alpha_d f^d` with non-negative coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyPolynomial {
    coefficients: Vec<f64>,
}

impl LatencyPolynomial {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::Validation("empty latency polynomial".into()));
        }
        if coefficients.iter().any(|a| !a.is_finite()) {
            return Err(Error::Validation("non-finite latency coefficient".into()));
        }
        if coefficients[0] < 0.0 {
            return Err(Error::Validation("negative free-flow latency".into()));
        }
        if coefficients[1..].iter().any(|&a| a < 0.0) {
            return Err(Error::Validation("non-monotone latency".into()));
        }
        Ok(Self { coefficients })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Highest power with a stored coefficient.
    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Coefficient of `f^d`, zero beyond the stored degree.
    pub fn coefficient(&self, d: usize) -> f64 {
        self.coefficients.get(d).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, f: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &a| acc * f + a)
    }

    pub fn derivative(&self, f: f64) -> f64 {
        let mut acc = 0.0;
        for (d, &a) in self.coefficients.iter().enumerate().skip(1).rev() {
            acc = acc * f + d as f64 * a;
        }
        acc
    }

    /// Closed-form `int_0^f l(s) ds`.
    pub fn integral(&self, f: f64) -> f64 {
        let mut acc = 0.0;
        for (d, &a) in self.coefficients.iter().enumerate().rev() {
            acc = acc * f + a / (d + 1) as f64;
        }
        acc * f
    }
}

/// A flow vector on the simplex `P_n(mass)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteFlow {
    mass: f64,
    values: Vec<f64>,
}

impl RouteFlow {
    pub fn new(mass: f64, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < -MASS_TOL) {
            return Err(Error::Validation("route flow has a negative entry".into()));
        }
        let total: f64 = values.iter().sum();
        if (total - mass).abs() > MASS_TOL * (1.0 + mass.abs()) {
            return Err(Error::Validation(format!(
                "route flow sums to {total} instead of {mass}"
            )));
        }
        Ok(Self { mass, values })
    }

    /// Builds a flow whose mass is the sum of its entries.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { mass: values.iter().sum(), values }
    }

    pub fn zeros(n: usize) -> Self {
        Self { mass: 0.0, values: vec![0.0; n] }
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// On-disk scenario document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub states: Vec<String>,
    pub prior: Vec<f64>,
    pub links: Vec<String>,
    pub routes: Vec<Vec<String>>,
    pub demand: f64,
    pub latency: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
}

/// Validated routing game.
#[derive(Debug, Clone)]
pub struct RoutingScenario {
    states: Vec<String>,
    prior: Vec<f64>,
    links: Vec<String>,
    routes: Vec<Vec<usize>>,
    latency: Vec<Vec<LatencyPolynomial>>,
    demand: f64,
    degree: usize,
    parallel: bool,
}

impl RoutingScenario {
    /// Validates and assembles a scenario. `latency[state][link]` holds coefficients.
    pub fn new(
        states: Vec<String>,
        prior: Vec<f64>,
        links: Vec<String>,
        routes: Vec<Vec<usize>>,
        latency: Vec<Vec<Vec<f64>>>,
        demand: f64,
    ) -> Result<Self> {
        let s = states.len();
        if s == 0 {
            return Err(Error::Validation("at least one state required".into()));
        }
        if states.iter().collect::<BTreeSet<_>>().len() != s {
            return Err(Error::Validation("duplicate state label".into()));
        }
        if links.iter().collect::<BTreeSet<_>>().len() != links.len() {
            return Err(Error::Validation("duplicate link id".into()));
        }
        if prior.len() != s {
            return Err(Error::Validation(format!(
                "prior has {} entries for {s} states",
                prior.len()
            )));
        }
        if prior.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(Error::Validation("prior not interior".into()));
        }
        let total: f64 = prior.iter().sum();
        if (total - 1.0).abs() > PRIOR_SUM_TOL {
            return Err(Error::Validation(format!("prior sums to {total}, not 1")));
        }
        if !demand.is_finite() || demand <= 0.0 {
            return Err(Error::Validation("demand must be positive".into()));
        }
        if routes.len() < 2 {
            return Err(Error::Validation("at least two routes required".into()));
        }
        let mut used = vec![false; links.len()];
        for (i, route) in routes.iter().enumerate() {
            if route.is_empty() {
                return Err(Error::Validation(format!("route {i} is empty")));
            }
            let mut seen = BTreeSet::new();
            for &e in route {
                if e >= links.len() {
                    return Err(Error::Validation(format!("route {i} uses an unknown link")));
                }
                if !seen.insert(e) {
                    return Err(Error::Validation(format!("route {i} repeats a link")));
                }
                used[e] = true;
            }
        }
        if let Some(e) = used.iter().position(|u| !u) {
            return Err(Error::Validation(format!(
                "link {} is not used by any route",
                links[e]
            )));
        }
        if latency.len() != s {
            return Err(Error::Validation("latency table must list every state".into()));
        }
        let mut table = Vec::with_capacity(s);
        let mut degree = 0;
        for row in latency {
            if row.len() != links.len() {
                return Err(Error::Validation("latency table must list every link".into()));
            }
            let mut polys = Vec::with_capacity(row.len());
            for coeffs in row {
                let p = LatencyPolynomial::new(coeffs)?;
                degree = degree.max(p.degree());
                polys.push(p);
            }
            table.push(polys);
        }
        let parallel = routes.len() == links.len()
            && routes.iter().enumerate().all(|(i, r)| r.len() == 1 && r[0] == i);
        Ok(Self { states, prior, links, routes, latency: table, demand, degree, parallel })
    }

    /// Parallel network with route `i` = link `i`; `latency[state][link]` holds coefficients.
    pub fn parallel(prior: Vec<f64>, latency: Vec<Vec<Vec<f64>>>, demand: f64) -> Result<Self> {
        let s = prior.len();
        let n = latency.first().map_or(0, |r| r.len());
        Self::new(
            (1..=s).map(|w| format!("w{w}")).collect(),
            prior,
            (1..=n).map(|e| format!("e{e}")).collect(),
            (0..n).map(|i| vec![i]).collect(),
            latency,
            demand,
        )
    }

    pub fn from_file(doc: ScenarioFile) -> Result<Self> {
        let link_index: BTreeMap<&str, usize> =
            doc.links.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let mut routes = Vec::with_capacity(doc.routes.len());
        for (i, r) in doc.routes.iter().enumerate() {
            let mut ids = Vec::with_capacity(r.len());
            for l in r {
                let e = link_index.get(l.as_str()).ok_or_else(|| {
                    Error::Validation(format!("route {i} uses unknown link {l}"))
                })?;
                ids.push(*e);
            }
            routes.push(ids);
        }
        for state in doc.latency.keys() {
            if !doc.states.contains(state) {
                return Err(Error::Validation(format!("latency given for unknown state {state}")));
            }
        }
        let mut latency = Vec::with_capacity(doc.states.len());
        for state in &doc.states {
            let per_link = doc
                .latency
                .get(state)
                .ok_or_else(|| Error::Validation(format!("missing latency for state {state}")))?;
            for link in per_link.keys() {
                if !link_index.contains_key(link.as_str()) {
                    return Err(Error::Validation(format!("latency given for unknown link {link}")));
                }
            }
            let mut row = Vec::with_capacity(doc.links.len());
            for link in &doc.links {
                let coeffs = per_link.get(link).ok_or_else(|| {
                    Error::Validation(format!("missing latency for state {state}, link {link}"))
                })?;
                row.push(coeffs.clone());
            }
            latency.push(row);
        }
        Self::new(doc.states, doc.prior, doc.links, routes, latency, doc.demand)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ScenarioFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_file(doc)
    }

    pub fn to_file(&self) -> ScenarioFile {
        let mut latency = BTreeMap::new();
        for (w, state) in self.states.iter().enumerate() {
            let row = self
                .links
                .iter()
                .enumerate()
                .map(|(e, l)| (l.clone(), self.latency[w][e].coefficients.clone()))
                .collect();
            latency.insert(state.clone(), row);
        }
        ScenarioFile {
            states: self.states.clone(),
            prior: self.prior.clone(),
            links: self.links.clone(),
            routes: self
                .routes
                .iter()
                .map(|r| r.iter().map(|&e| self.links[e].clone()).collect())
                .collect(),
            demand: self.demand,
            latency,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }

    /// Same network and prior with a different demand.
    pub fn with_demand(&self, demand: f64) -> Result<Self> {
        if !demand.is_finite() || demand < 0.0 {
            return Err(Error::Validation("demand must be non-negative".into()));
        }
        let mut out = self.clone();
        out.demand = demand;
        Ok(out)
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn links(&self) -> &[String] {
        &self.links
    }

    pub fn routes(&self) -> &[Vec<usize>] {
        &self.routes
    }

    pub fn demand(&self) -> f64 {
        self.demand
    }

    /// Number of states `s`.
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// Number of routes `n`.
    pub fn num_routes(&self) -> usize {
        self.routes.len()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    /// Maximum latency degree `D`.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_parallel(&self) -> bool {
        self.parallel
    }

    pub fn latency(&self, state: usize, link: usize) -> &LatencyPolynomial {
        &self.latency[state][link]
    }

    pub fn state_index(&self, label: &str) -> Result<usize> {
        self.states
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| Error::Validation(format!("unknown state {label}")))
    }

    /// Link flows `x~_e = sum_{i: e in i} x_i`.
    pub fn link_flows(&self, route_flow: &[f64]) -> Result<Vec<f64>> {
        self.check_len(route_flow)?;
        let mut out = vec![0.0; self.links.len()];
        self.accumulate_link_flows(route_flow, &mut out);
        Ok(out)
    }

    pub(crate) fn accumulate_link_flows(&self, route_flow: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (route, &x) in self.routes.iter().zip(route_flow) {
            for &e in route {
                out[e] += x;
            }
        }
    }

    /// Route latencies `sum_{e in i} l_{w,e}(x~_e)` at an aggregate route flow.
    pub fn route_latency(&self, state: usize, route_flow: &[f64]) -> Result<Vec<f64>> {
        if state >= self.states.len() {
            return Err(Error::Validation(format!("unknown state index {state}")));
        }
        let links = self.link_flows(route_flow)?;
        let link_lat: Vec<f64> =
            links.iter().enumerate().map(|(e, &f)| self.latency[state][e].eval(f)).collect();
        Ok(self.routes.iter().map(|r| r.iter().map(|&e| link_lat[e]).sum()).collect())
    }

    /// Expected total latency `sum_w mu0(w) sum_e F_e l_{w,e}(F_e)` of one flow in one state.
    pub fn state_total_latency(&self, state: usize, route_flow: &[f64]) -> Result<f64> {
        let links = self.link_flows(route_flow)?;
        Ok(links.iter().enumerate().map(|(e, &f)| f * self.latency[state][e].eval(f)).sum())
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.routes.len() {
            return Err(Error::Dimension { expected: self.routes.len(), got: v.len() });
        }
        Ok(())
    }
}

/// Loads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<RoutingScenario> {
    let text = std::fs::read_to_string(path)?;
    RoutingScenario::from_json(&text)
}

/// Per-state evaluation of link and route quantities at one aggregate flow.
#[derive(Debug, Clone)]
pub(crate) struct StateEval {
    pub link_flow: Vec<f64>,
    pub link_lat: Vec<f64>,
    pub link_dlat: Vec<f64>,
    /// Route latencies `c_i`.
    pub route_lat: Vec<f64>,
    /// Route marginal costs `sum_{e in i} (l_e + F_e l'_e)`.
    pub route_marginal: Vec<f64>,
    /// `sum_e F_e l_e(F_e)`.
    pub total: f64,
    /// `sum_e int_0^{F_e} l_e`.
    pub potential: f64,
}

impl StateEval {
    pub fn new(scenario: &RoutingScenario) -> Self {
        let e = scenario.num_links();
        let n = scenario.num_routes();
        Self {
            link_flow: vec![0.0; e],
            link_lat: vec![0.0; e],
            link_dlat: vec![0.0; e],
            route_lat: vec![0.0; n],
            route_marginal: vec![0.0; n],
            total: 0.0,
            potential: 0.0,
        }
    }

    pub fn evaluate(&mut self, scenario: &RoutingScenario, state: usize, flow: &[f64]) {
        scenario.accumulate_link_flows(flow, &mut self.link_flow);
        self.total = 0.0;
        self.potential = 0.0;
        for e in 0..self.link_flow.len() {
            let f = self.link_flow[e];
            let p = &scenario.latency[state][e];
            let l = p.eval(f);
            let dl = p.derivative(f);
            self.link_lat[e] = l;
            self.link_dlat[e] = dl;
            self.total += f * l;
            self.potential += p.integral(f);
        }
        for (i, route) in scenario.routes.iter().enumerate() {
            let mut c = 0.0;
            let mut g = 0.0;
            for &e in route {
                c += self.link_lat[e];
                g += self.link_lat[e] + self.link_flow[e] * self.link_dlat[e];
            }
            self.route_lat[i] = c;
            self.route_marginal[i] = g;
        }
    }

    /// `d c_i / d x_j = sum_{e in i and j} l'_e`.
    pub fn route_jacobian(&self, scenario: &RoutingScenario, i: usize, j: usize) -> f64 {
        if scenario.parallel {
            return if i == j { self.link_dlat[i] } else { 0.0 };
        }
        let rj = &scenario.routes[j];
        scenario.routes[i].iter().filter(|e| rj.contains(e)).map(|&e| self.link_dlat[e]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_link_affine() -> RoutingScenario {
        RoutingScenario::parallel(
            vec![0.6, 0.4],
            vec![vec![vec![5.0, 4.0], vec![25.0, 2.0]], vec![vec![20.0, 1.0], vec![15.0, 2.0]]],
            5.0,
        )
        .unwrap()
    }

    #[test]
    fn polynomial_eval_derivative_integral() {
        let p = LatencyPolynomial::new(vec![5.0, 0.0, 0.0, 0.0, 0.047]).unwrap();
        assert!((p.eval(2.0) - (5.0 + 0.047 * 16.0)).abs() < 1e-12);
        assert!((p.derivative(2.0) - 4.0 * 0.047 * 8.0).abs() < 1e-12);
        assert!((p.integral(2.0) - (10.0 + 0.047 * 32.0 / 5.0)).abs() < 1e-12);
        assert_eq!(p.degree(), 4);
    }

    #[test]
    fn rejects_negative_slope() {
        let err = LatencyPolynomial::new(vec![1.0, -1.0]).unwrap_err();
        assert!(err.to_string().contains("non-monotone latency"));
    }

    #[test]
    fn rejects_boundary_prior() {
        let err = RoutingScenario::parallel(
            vec![1.0, 0.0],
            vec![vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![vec![1.0, 1.0], vec![1.0, 1.0]]],
            1.0,
        )
        .unwrap_err();
        assert!(err.to_string().contains("prior not interior"));
    }

    #[test]
    fn affine_route_latency_by_hand() {
        let sc = two_link_affine();
        assert_eq!(sc.route_latency(0, &[5.0, 0.0]).unwrap(), vec![25.0, 25.0]);
        assert_eq!(sc.route_latency(1, &[0.0, 0.0]).unwrap(), vec![20.0, 15.0]);
        assert_eq!(sc.degree(), 1);
        assert!(sc.is_parallel());
    }

    #[test]
    fn link_flows_on_shared_links() {
        let sc = RoutingScenario::new(
            vec!["a".into()],
            vec![1.0],
            (1..=5).map(|e| e.to_string()).collect(),
            vec![vec![0, 1], vec![2, 3], vec![0, 4, 3]],
            vec![vec![vec![1.0, 1.0]; 5]],
            2.5,
        )
        .unwrap();
        assert_eq!(sc.link_flows(&[1.0, 0.0, 0.0]).unwrap(), vec![1.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(sc.link_flows(&[0.0, 0.0, 1.0]).unwrap(), vec![1.0, 0.0, 0.0, 1.0, 1.0]);
        assert!(!sc.is_parallel());
        assert!(matches!(sc.link_flows(&[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn unused_link_rejected() {
        let err = RoutingScenario::new(
            vec!["a".into()],
            vec![1.0],
            vec!["1".into(), "2".into(), "3".into()],
            vec![vec![0], vec![1]],
            vec![vec![vec![1.0]; 3]],
            1.0,
        )
        .unwrap_err();
        assert!(err.to_string().contains("not used"));
    }

    #[test]
    fn json_round_trip() {
        let sc = two_link_affine();
        let back = RoutingScenario::from_json(&sc.to_json()).unwrap();
        assert_eq!(back.prior(), sc.prior());
        assert_eq!(back.routes(), sc.routes());
        assert_eq!(back.latency(1, 1), sc.latency(1, 1));
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(RoutingScenario::from_json("{ states: "), Err(Error::Parse(_))));
    }

    #[test]
    fn state_eval_matches_direct() {
        let sc = two_link_affine();
        let mut ev = StateEval::new(&sc);
        ev.evaluate(&sc, 0, &[3.0, 2.0]);
        assert_eq!(ev.route_lat, vec![17.0, 29.0]);
        assert_eq!(ev.route_marginal, vec![29.0, 33.0]);
        assert!((ev.total - (3.0 * 17.0 + 2.0 * 29.0)).abs() < 1e-12);
        assert!((ev.potential - (15.0 + 18.0 + 50.0 + 4.0)).abs() < 1e-12);
    }
}
