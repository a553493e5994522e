"""
Synthetic scenes, toy training, Monte-Carlo and metric tooling used to audit
the loss
"""
