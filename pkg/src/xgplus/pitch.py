"""Pitch geometry constants.

Coordinates are in meters with the origin at the pitch center. After
direction normalization the attacking team always plays toward +x, so the
defended goal sits on the line x = +52.5 centered at y = 0.
"""

PITCH_LENGTH = 105.0
PITCH_WIDTH = 68.0

HALF_LENGTH = PITCH_LENGTH / 2.0  # 52.5
HALF_WIDTH = PITCH_WIDTH / 2.0    # 34.0

GOAL_X = HALF_LENGTH
GOAL_Y = 0.0
GOAL_WIDTH = 7.32
GOAL_HALF_WIDTH = GOAL_WIDTH / 2.0  # 3.66

# Final third of pitch length in normalized coordinates.
ATTACKING_THIRD_X = HALF_LENGTH - PITCH_LENGTH / 3.0  # 17.5

# Positions may drift slightly outside the lines (throw-ins, corners).
POSITION_MARGIN = 5.0

FPS = 30
FRAME_DT = 1.0 / FPS

# Defenders are modeled as circles of 75 cm diameter for occlusion.
DEFENDER_RADIUS = 0.375

MAX_PLAYER_SPEED = 9.0   # m/s
MAX_BALL_SPEED = 35.0    # m/s

# Padding for absent neighbor slots in the feature vector.
SENTINEL_DIST = 150.0
SENTINEL_ANGLE = 0.0
