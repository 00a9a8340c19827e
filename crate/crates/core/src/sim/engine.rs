//! Slot-by-slot engine. Within slot `n`:
//!
//! 1. if work is present the server gives one unit to the customer chosen
//!    by the discipline, and a finished customer departs;
//! 2. every class chain moves once; a move into an active state draws a
//!    batch, and each new customer draws its service time;
//! 3. the unfinished work becomes `max(X - 1, 0) + B_n`.
//!
//! A customer arriving in slot `n` can be served from slot `n + 1` on, and
//! its wait is `start - arrival - 1`.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Discipline;
use crate::analytic::stationary_split;
use crate::model::{ClassSpec, SystemSpec};
use crate::pmf::Pmf;

/// Inverse-CDF sampler over a finite support.
#[derive(Debug, Clone)]
pub(crate) struct Sampler {
    cum: Vec<f64>,
    values: Vec<u64>,
}

impl Sampler {
    fn new(values: Vec<u64>, probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let mut cum: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        // close the table at the last reachable value so rounding never
        // lets a draw fall past it
        let last = probs.iter().rposition(|p| *p > 0.0).unwrap_or(0);
        cum[last..].iter_mut().for_each(|c| *c = 1.0);
        Sampler { cum, values }
    }

    fn from_pmf(pmf: &Pmf) -> Self {
        Sampler::new(pmf.values().to_vec(), pmf.probs())
    }

    fn sample(&self, rng: &mut impl Rng) -> u64 {
        let u: f64 = rng.random();
        self.values[self.cum.partition_point(|&c| c <= u)]
    }
}

#[derive(Debug, Clone, Copy)]
struct Customer {
    arrival: u64,
    remaining: u64,
    started: Option<u64>,
}

/// One class: its arrival chain, its samplers, its queue and its RNG.
struct ClassSim {
    next_state: Vec<Sampler>,
    /// `batches[from][to - 1]`, for moves into active states.
    batches: Vec<Vec<Sampler>>,
    service: Sampler,
    state: usize,
    queue: VecDeque<Customer>,
    work: u64,
    waiting: u64,
    rng: ChaCha8Rng,
}

impl ClassSim {
    fn new(spec: &ClassSpec, mut rng: ChaCha8Rng) -> Self {
        let stream = &spec.stream;
        let m = stream.active_states();
        let next_state = stream
            .full_matrix()
            .into_iter()
            .map(|row| {
                let row: Vec<f64> = row.into_iter().map(|p| p.max(0.0)).collect();
                Sampler::new((0..=m as u64).collect(), &row)
            })
            .collect();
        let batches = (0..=m)
            .map(|from| {
                (1..=m)
                    .map(|to| Sampler::from_pmf(stream.batch(from, to).expect("active target")))
                    .collect()
            })
            .collect();
        // start from the stationary law of the chain
        let (pi0, pi1) = stationary_split(stream).expect("validated stream");
        let mut probs = vec![pi0];
        probs.extend(pi1);
        let state = Sampler::new((0..=m as u64).collect(), &probs).sample(&mut rng) as usize;
        ClassSim {
            next_state,
            batches,
            service: Sampler::from_pmf(&spec.service.pmf),
            state,
            queue: VecDeque::new(),
            work: 0,
            waiting: 0,
            rng,
        }
    }
}

/// What happened in one slot.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SlotEvents {
    /// Class (0-based) that received the slot's unit of service.
    pub served: Option<usize>,
    /// Class (0-based) of the customer that departed, if any.
    pub departed: Option<usize>,
    /// Customers that arrived, per class.
    pub arrivals: Vec<u64>,
    /// Work brought by the arrivals, `B_n`.
    pub work_arrived: u64,
    /// Unfinished work at the end of the slot.
    pub unfinished: u64,
}

/// A customer's first entry into service.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceStart {
    pub class: usize,
    pub arrival: u64,
    pub slot: u64,
}

impl ServiceStart {
    pub fn wait(&self) -> u64 {
        self.slot - self.arrival - 1
    }
}

/// A finished service: start slot and completion slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Completion {
    pub class: usize,
    pub started: u64,
    pub slot: u64,
}

pub struct Engine {
    classes: Vec<ClassSim>,
    discipline: Discipline,
    /// Class whose started customer keeps the server under NP.
    in_service: Option<usize>,
    slot: u64,
    unfinished: u64,
    pub(crate) last_start: Option<ServiceStart>,
    pub(crate) last_completion: Option<Completion>,
}

/// Per-class RNG: one stream per (replication, class) pair, so a class's
/// sample path does not depend on which other classes exist.
pub fn class_rng(seed: u64, replication: u64, class: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((replication << 16) | class as u64);
    rng
}

impl Engine {
    pub fn new(system: &SystemSpec, discipline: Discipline, seed: u64, replication: u64) -> Self {
        let classes = system
            .classes
            .iter()
            .enumerate()
            .map(|(k, c)| ClassSim::new(c, class_rng(seed, replication, k)))
            .collect();
        Engine {
            classes,
            discipline,
            in_service: None,
            slot: 0,
            unfinished: 0,
            last_start: None,
            last_completion: None,
        }
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn unfinished(&self) -> u64 {
        self.unfinished
    }

    pub fn class_work(&self, k: usize) -> u64 {
        self.classes[k].work
    }

    /// Customers of class `k` present that have not started service.
    pub fn class_waiting(&self, k: usize) -> u64 {
        self.classes[k].waiting
    }

    pub fn chain_state(&self, k: usize) -> usize {
        self.classes[k].state
    }

    fn pick(&self) -> Option<usize> {
        let nonempty = || (0..self.classes.len()).filter(|&k| !self.classes[k].queue.is_empty());
        match self.discipline {
            Discipline::Fcfs => nonempty().min_by_key(|&k| (self.classes[k].queue[0].arrival, k)),
            Discipline::PreemptiveResume => nonempty().next(),
            Discipline::NonPreemptive => self.in_service.or_else(|| nonempty().next()),
        }
    }

    /// Service step only. Split out so observers can sample between service
    /// and arrivals.
    pub fn serve(&mut self) -> (Option<usize>, Option<usize>) {
        self.last_start = None;
        self.last_completion = None;
        if self.unfinished == 0 {
            return (None, None);
        }
        let slot = self.slot;
        let k = self.pick().expect("positive work implies a customer");
        let class = &mut self.classes[k];
        let head = class.queue.front_mut().expect("picked class is non-empty");
        let started = match head.started {
            Some(s) => s,
            None => {
                head.started = Some(slot);
                class.waiting -= 1;
                self.last_start = Some(ServiceStart {
                    class: k,
                    arrival: head.arrival,
                    slot,
                });
                slot
            }
        };
        head.remaining -= 1;
        class.work -= 1;
        self.unfinished -= 1;
        if head.remaining == 0 {
            class.queue.pop_front();
            self.in_service = None;
            self.last_completion = Some(Completion {
                class: k,
                started,
                slot,
            });
            (Some(k), Some(k))
        } else {
            self.in_service = Some(k);
            (Some(k), None)
        }
    }

    /// Chain moves and arrivals; closes the slot.
    pub fn arrive(&mut self) -> (Vec<u64>, u64) {
        let slot = self.slot;
        let mut counts = Vec::with_capacity(self.classes.len());
        let mut work = 0;
        for class in &mut self.classes {
            let from = class.state;
            let to = class.next_state[from].sample(&mut class.rng) as usize;
            class.state = to;
            let mut n = 0;
            if to != 0 {
                n = class.batches[from][to - 1].sample(&mut class.rng);
                for _ in 0..n {
                    let h = class.service.sample(&mut class.rng);
                    class.queue.push_back(Customer {
                        arrival: slot,
                        remaining: h,
                        started: None,
                    });
                    class.work += h;
                    work += h;
                }
                class.waiting += n;
            }
            counts.push(n);
        }
        self.unfinished += work;
        self.slot += 1;
        #[cfg(debug_assertions)]
        if self.slot.is_multiple_of(10_000) {
            self.check_work();
        }
        (counts, work)
    }

    pub fn advance_slot(&mut self) -> SlotEvents {
        let (served, departed) = self.serve();
        let (arrivals, work_arrived) = self.arrive();
        SlotEvents {
            served,
            departed,
            arrivals,
            work_arrived,
            unfinished: self.unfinished,
        }
    }

    /// Unfinished work equals the remaining work of every customer present.
    pub fn check_work(&self) {
        let total: u64 = self
            .classes
            .iter()
            .map(|c| {
                let w: u64 = c.queue.iter().map(|x| x.remaining).sum();
                assert_eq!(w, c.work, "class work out of sync");
                w
            })
            .sum();
        assert_eq!(total, self.unfinished, "unfinished work out of sync");
    }

    /// Adds one customer of class `k` by hand (for tests and examples).
    pub fn inject(&mut self, k: usize, service: u64) {
        let slot = self.slot.saturating_sub(1);
        let class = &mut self.classes[k];
        class.queue.push_back(Customer {
            arrival: slot,
            remaining: service,
            started: None,
        });
        class.work += service;
        class.waiting += 1;
        self.unfinished += service;
    }
}
