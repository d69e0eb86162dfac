"""Synthetic multi-domain dialogue environment."""
from .episode import (
    MAX_TURNS,
    SUCCESS,
    TIMEOUT,
    DialogueEnv,
    EpisodeLog,
    Turn,
    episode_reward,
    expert_dialogues,
    generate_corpus,
    read_episodes,
    run_episode,
    split_sizes,
    write_episodes,
)
from .expert import ExpertPolicy, active_domain, expert_policy
from .goal import UserGoal, sample_goal
from .schema import (
    DONTCARE,
    PEOPLE,
    Domain,
    DomainSchema,
    EntityDB,
    default_db,
    default_schema,
    load_world,
    satisfies,
    save_world,
    system_space,
    user_space,
)
from .tracker import NO_RESULTS_YET, StateEncoder, TrackerState, count_bucket, dst_update, encode_state
from .user import SystemTurn, UserAct, UserAgenda, user_step
