TASK_GOAL = (
    "Task goal: You have a decision-making task for base station power control, "
    "and you need to select between 4 power levels from 1 to 4."
)
TASK_DEFINITION_USERS = (
    "Task definition: You have to consider the specific user number of each case, "
    "which is the “BS user number”."
)
# Case II relabels the state; the rest of the box is unchanged.
TASK_DEFINITION_DISTANCE = (
    "Task definition: You have to consider the specific average user distance of each case, "
    "which is the “average user distance”."
)
EXAMPLES_HEADER = "Following are some examples:"
QUERY_USERS = "Now I will give you a new condition to solve, the current BS user number is {state}."
QUERY_DISTANCE = (
    "Now I will give you a new condition to solve, the current average user distance is {state} m."
)
RULES = (
    "Rules: Now please select from “level 1”, “level 2”, “level 3”, and “level 4” "
    "based on the above examples."
)

GOOD_EXAMPLES_LABEL = "Good examples:"
BAD_EXAMPLES_LABEL = "Bad examples to avoid:"
CLARIFICATION = "Reply with exactly one of: level 1, level 2, level 3, level 4."

DISCRETE_TEMPLATE = "\n".join(
    [TASK_GOAL, TASK_DEFINITION_USERS, EXAMPLES_HEADER, "{examples}", QUERY_USERS, RULES]
)
CONTINUOUS_TEMPLATE = "\n".join(
    [TASK_GOAL, TASK_DEFINITION_DISTANCE, EXAMPLES_HEADER, "{examples}", QUERY_DISTANCE, RULES]
)
