pub mod alignment;
pub mod extraction;
pub mod fsutil;
pub mod pairing;
pub mod pipeline;
pub mod crawler;
pub mod review;
pub mod tmx;
