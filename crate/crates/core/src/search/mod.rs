//! Genetic search over static initial conditions.

mod bounds;
mod evaluate;
mod ga;
mod operators;

pub use bounds::{Genotype, ParamBounds, ParamKind, ParamRange, PARAM_NAMES};
pub use evaluate::{
    evaluate_candidate, replay_episode, run_random_search, run_search, search_initial_conditions, Behaviour,
    CandidateSummary, Evaluation, FoundFailure, SearchOutcome,
};
pub use ga::{run_budgeted, AskTell, Evaluated, GaConfig, GeneticAlgorithm, Individual, RandomSearch};
pub use operators::{distance, is_distinct, polynomial_mutation, remove_duplicates, sbx_crossover};
