//! Textbook segmentation, exercise parsing, and key-topic assignment.

mod exercise;
mod markup;
mod store;
mod topics;

pub use exercise::{
    link_exercise_topics, parse_exercise, parse_exercises_jsonl, AmbiguousKind, Choice, Exercise, ExerciseError,
    ExerciseKind, ExerciseMarkers, ExerciseParser, ParsedExercise, RawExercise,
};
pub use markup::{segment_textbook, DocTree, HeadingRules, Lesson, Section, SegmentError, Unit};
pub use store::{section_iri, store_book, store_catalog, store_exercises, StoreReport};
pub use topics::{
    assign_key_topics, book_tfidf, mentions, section_topic_score, ScoreMode, ScoredTopic, SectionTopicScore,
    SectionTopics, TopicCatalog, TopicEntry, TopicError, DEFAULT_THETA_TOPIC,
};
