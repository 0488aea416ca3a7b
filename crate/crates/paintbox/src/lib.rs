//! HTTP and streaming front end for a [`paintbox_core::engine::Session`].

pub mod server;
