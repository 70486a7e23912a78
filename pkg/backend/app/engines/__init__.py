# Empty __init__ file for engines package
