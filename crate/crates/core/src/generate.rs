//! Deterministic random schema generation for property testing.
//!
//! Schemas are valid by construction: classes inherit only from earlier
//! classes, field names are globally unique, self-calls target methods
//! known to the class, and prefixed calls target real ancestors. Knobs
//! control hierarchy depth, multiple inheritance, call densities, and
//! recursion cycles.

use std::collections::BTreeSet;

/// SplitMix64: tiny, seedable, stable across platforms and releases.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in `0..bound` (bound 0 yields 0).
    pub fn below(&mut self, bound: usize) -> usize {
        if bound == 0 {
            0
        } else {
            (self.next_u64() % bound as u64) as usize
        }
    }

    /// Bernoulli with probability `p`.
    pub fn chance(&mut self, p: f64) -> bool {
        ((self.next_u64() >> 11) as f64 / (1u64 << 53) as f64) < p
    }

    /// Pick one element of a non-empty slice.
    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len())]
    }
}

/// Size and density knobs for the generator.
#[derive(Debug, Clone)]
pub struct GenParams {
    /// Number of classes.
    pub classes: usize,
    /// Maximum own fields per class.
    pub max_fields: usize,
    /// Maximum own methods per class.
    pub max_methods: usize,
    /// Probability that a non-root class takes a second superclass.
    pub multi_inherit: f64,
    /// Probability that a method slot overrides an inherited name.
    pub override_prob: f64,
    /// Expected self-sends per method body.
    pub self_calls: f64,
    /// Probability of a prefixed send when ancestors exist.
    pub prefix_calls: f64,
    /// Probability that a method participates in a call cycle.
    pub recursion: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            classes: 6,
            max_fields: 3,
            max_methods: 4,
            multi_inherit: 0.3,
            override_prob: 0.35,
            self_calls: 0.8,
            prefix_calls: 0.4,
            recursion: 0.25,
        }
    }
}

impl GenParams {
    /// Small shapes for fast test loops.
    pub fn tiny() -> Self {
        GenParams {
            classes: 3,
            max_fields: 2,
            max_methods: 2,
            ..GenParams::default()
        }
    }
}

struct ClassSkeleton {
    name: String,
    supers: Vec<usize>,
    own_fields: Vec<String>,
    own_methods: Vec<String>,
    /// All fields visible from this class.
    all_fields: Vec<String>,
    /// All method names applicable to this class.
    all_methods: Vec<String>,
    /// All ancestors (as indices), nearest-first not guaranteed.
    ancestors: BTreeSet<usize>,
}

/// Generate schema source text, deterministically for a given seed.
pub fn generate_random_schema(seed: u64, params: &GenParams) -> String {
    let mut rng = SplitMix64::new(seed);
    let n = params.classes.max(1);

    // Skeletons first: names, supers, field and method name sets.
    let mut skeletons: Vec<ClassSkeleton> = Vec::with_capacity(n);
    for ci in 0..n {
        let name = format!("k{ci}");
        let mut supers: Vec<usize> = Vec::new();
        if ci > 0 && rng.chance(0.8) {
            supers.push(rng.below(ci));
            if rng.chance(params.multi_inherit) {
                let second = rng.below(ci);
                if !supers.contains(&second) {
                    supers.push(second);
                }
            }
        }

        let mut ancestors: BTreeSet<usize> = BTreeSet::new();
        for &s in &supers {
            ancestors.insert(s);
            ancestors.extend(skeletons[s].ancestors.iter().copied());
        }

        let mut all_fields: Vec<String> = Vec::new();
        let mut seen_fields: BTreeSet<String> = BTreeSet::new();
        let mut all_methods: Vec<String> = Vec::new();
        let mut seen_methods: BTreeSet<String> = BTreeSet::new();
        for &a in &ancestors {
            for f in &skeletons[a].own_fields {
                if seen_fields.insert(f.clone()) {
                    all_fields.push(f.clone());
                }
            }
            for m in &skeletons[a].own_methods {
                if seen_methods.insert(m.clone()) {
                    all_methods.push(m.clone());
                }
            }
        }

        // Globally unique field names keep hierarchies collision-free.
        let n_fields = 1 + rng.below(params.max_fields.max(1));
        let mut own_fields = Vec::new();
        for fi in 0..n_fields {
            let f = format!("g{ci}_{fi}");
            own_fields.push(f.clone());
            all_fields.push(f.clone());
            seen_fields.insert(f);
        }

        let inherited_names: Vec<String> = all_methods.clone();
        let n_methods = 1 + rng.below(params.max_methods.max(1));
        let mut own_methods = Vec::new();
        for mi in 0..n_methods {
            let name = if !inherited_names.is_empty() && rng.chance(params.override_prob) {
                let pick = rng.pick(&inherited_names).clone();
                if own_methods.contains(&pick) {
                    format!("p{ci}_{mi}")
                } else {
                    pick
                }
            } else {
                format!("p{ci}_{mi}")
            };
            if seen_methods.insert(name.clone()) {
                all_methods.push(name.clone());
            }
            own_methods.push(name);
        }

        skeletons.push(ClassSkeleton {
            name,
            supers,
            own_fields,
            own_methods,
            all_fields,
            all_methods,
            ancestors,
        });
    }

    // Bodies second, now that every class's view is known.
    let mut bodies: Vec<Vec<Vec<String>>> = Vec::with_capacity(n);
    for ci in 0..n {
        let sk = &skeletons[ci];
        let mut class_bodies = Vec::new();
        for own_idx in 0..sk.own_methods.len() {
            let mut stmts: Vec<String> = Vec::new();

            for _ in 0..rng.below(3) {
                let target = rng.pick(&sk.all_fields).clone();
                let n_reads = rng.below(3);
                let reads: Vec<String> = (0..n_reads)
                    .map(|_| rng.pick(&sk.all_fields).clone())
                    .collect();
                stmts.push(format!("{} := expr({});", target, reads.join(", ")));
            }
            for _ in 0..rng.below(2) {
                let n_reads = 1 + rng.below(2);
                let reads: Vec<String> = (0..n_reads)
                    .map(|_| rng.pick(&sk.all_fields).clone())
                    .collect();
                stmts.push(format!("use({});", reads.join(", ")));
            }

            // Plain self-sends; density is the expected count.
            let mut sends = 0;
            while rng.chance(params.self_calls / (1.0 + sends as f64)) && sends < 3 {
                let target = rng.pick(&sk.all_methods).clone();
                stmts.push(format!("send {target} to self;"));
                sends += 1;
            }

            // A cycle-inducing send back to an earlier method, or to
            // the method itself.
            if rng.chance(params.recursion) {
                let target = if own_idx > 0 && rng.chance(0.6) {
                    sk.own_methods[rng.below(own_idx)].clone()
                } else {
                    sk.own_methods[own_idx].clone()
                };
                stmts.push(format!("send {target} to self;"));
            }

            // Prefixed send to a real ancestor method.
            if !sk.ancestors.is_empty() && rng.chance(params.prefix_calls) {
                let ancs: Vec<usize> = sk.ancestors.iter().copied().collect();
                let a = *rng.pick(&ancs);
                if !skeletons[a].all_methods.is_empty() {
                    let target = rng.pick(&skeletons[a].all_methods).clone();
                    stmts.push(format!("send {}.{} to self;", skeletons[a].name, target));
                }
            }

            class_bodies.push(stmts);
        }
        bodies.push(class_bodies);
    }

    // Emit.
    let mut out = String::new();
    for ci in 0..n {
        let sk = &skeletons[ci];
        if ci > 0 {
            out.push('\n');
        }
        out.push_str("class ");
        out.push_str(&sk.name);
        if !sk.supers.is_empty() {
            out.push_str(" inherits ");
            let names: Vec<&str> = sk
                .supers
                .iter()
                .map(|&s| skeletons[s].name.as_str())
                .collect();
            out.push_str(&names.join(", "));
        }
        out.push_str(" {\n");
        if !sk.own_fields.is_empty() {
            out.push_str("  fields {\n");
            for f in &sk.own_fields {
                out.push_str(&format!("    {f}: int;\n"));
            }
            out.push_str("  }\n");
        }
        for (mi, m) in sk.own_methods.iter().enumerate() {
            out.push_str(&format!("  method {m} {{\n"));
            for stmt in &bodies[ci][mi] {
                out.push_str(&format!("    {stmt}\n"));
            }
            out.push_str("  }\n");
        }
        out.push_str("}\n");
    }
    out
}
