pub mod bench;
pub mod color;
pub mod config;
pub mod cot;
pub mod files;
pub mod geometry;
pub mod lego;
pub mod perception;
pub mod planner;
pub mod query;
pub mod remote;
pub mod scene;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/scene-graphs.md")]
    pub mod scene_graphs {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    pub mod dynamics {}
    #[doc = include_str!("../../../book/src/queries.md")]
    pub mod queries {}
    #[doc = include_str!("../../../book/src/lego.md")]
    pub mod lego {}
    #[doc = include_str!("../../../book/src/planning.md")]
    pub mod planning {}
    #[doc = include_str!("../../../book/src/command-grammar.md")]
    pub mod command_grammar {}
    #[doc = include_str!("../../../book/src/reasoning.md")]
    pub mod reasoning {}
    #[doc = include_str!("../../../book/src/benchmark.md")]
    pub mod benchmark {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
    #[doc = include_str!("../../../book/src/file-formats.md")]
    pub mod file_formats {}
}
